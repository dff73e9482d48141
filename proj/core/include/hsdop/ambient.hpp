#pragma once

#include <complex>
#include <memory>

#include "hsdop/dec.hpp"

namespace hsdop {

using CMat = Eigen::MatrixXcd;

/// Axis-aligned voxel grid around a complex. Voxel (i, j, k) has flat id
/// (i * res.y + j) * res.z + k and its sample point at the cell center.
struct AmbientGrid {
    Eigen::Vector3d lo = Eigen::Vector3d::Zero();
    Eigen::Vector3d hi = Eigen::Vector3d::Ones();
    Eigen::Vector3i res = Eigen::Vector3i::Constant(16);
    Eigen::Vector3d spacing = Eigen::Vector3d::Zero();
    double voxel_volume = 0.0;

    Eigen::Index num_voxels() const {
        return static_cast<Eigen::Index>(res.x()) * res.y() * res.z();
    }
    Eigen::Vector3d center(int i, int j, int k) const {
        return lo + spacing.cwiseProduct(
                         Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5));
    }
};

/// Grid with a 10% margin per axis around the mesh bounding box (degenerate
/// axes are padded from the diagonal instead), so all vertices are strictly
/// interior.
AmbientGrid make_grid(const MeshGeometry& geom,
                      Eigen::Vector3i res = Eigen::Vector3i::Constant(16),
                      double margin = 0.1);

enum class LiftKernel { trilinear_hat, gaussian };

/// Sampling bridge between cochains of one degree and grid fields.
///
/// The splat matrix S holds mass-normalized kernel weights at simplex
/// barycenters, one block of rows per channel; channel weights carry the
/// unit edge direction (1-forms) or unit face normal (2-forms). The pullback
/// is voxel_volume * diag(star)^{-1} S^T, which makes
///   <pullback(v), a>_star == voxel_volume * <v, S a>
/// hold to machine precision by construction.
struct LiftOperator {
    int degree = 0;
    int channels = 1;
    AmbientGrid grid;
    SpMat splat;         // (channels * V) x N_k
    SpMat pullback_mat;  // N_k x (channels * V)
    SpMat sample;        // N_k x V scalar kernel weights, rows sum to 1
    Vec occupancy;       // V, kernel mass per voxel scaled to max 1

    /// Cochain -> field, one column per channel.
    Mat lift(const Vec& values) const;
    /// Field -> cochain values.
    Vec pullback(const Mat& field) const;
};

/// Build the lift for one degree. gaussian bandwidth eps must stay below a
/// quarter of the smallest padded grid extent (BandwidthTooLarge otherwise);
/// it is ignored by trilinear_hat.
LiftOperator build_lift(const AmbientGrid& grid,
                        const OrientedSimplicialComplex& c,
                        const MeshGeometry& geom, int degree,
                        const HodgeStar& star,
                        LiftKernel kernel = LiftKernel::trilinear_hat,
                        double eps = 0.0);

/// Resolution / bandwidth sanity report.
struct ResolutionReport {
    enum class Status { pass, warn, fail } status = Status::pass;
    double h_aux = 0.0;     // largest voxel spacing
    double eps = 0.0;       // bandwidth under test
    double suggested_eps = 0.0;
    std::string message;
};

/// Checks h_aux <= eps / 2 (pass) or h_aux <= eps (warn), and suggests
/// eps = sqrt(mean edge length * bbox diagonal), the h^(1/2) scaling.
ResolutionReport validate_resolution(const AmbientGrid& grid,
                                     const OrientedSimplicialComplex& c,
                                     const MeshGeometry& geom, double eps);

/// Per-mode complex channel mixing on retained low modes.
///
/// Modes (k1, k2, k3) with 0 <= kj < modes[j] are retained; weights is
/// n_modes x (cout * cin), mode-major, entry (t, o * cin + i). For every
/// retained mode the conjugate is written to the mirrored frequency so the
/// output field is real.
struct SpectralKernel {
    Eigen::Vector3i modes = Eigen::Vector3i::Constant(4);
    int cin = 1;
    int cout = 1;
    CMat weights;

    Eigen::Index num_modes() const {
        return static_cast<Eigen::Index>(modes.x()) * modes.y() * modes.z();
    }
};

/// FFT workspace for one grid shape; reusable across calls and threads.
class FftPlan3d {
public:
    explicit FftPlan3d(Eigen::Vector3i res);
    ~FftPlan3d();
    FftPlan3d(const FftPlan3d&) = delete;
    FftPlan3d& operator=(const FftPlan3d&) = delete;

    Eigen::Vector3i res() const { return res_; }
    /// Unnormalized forward DFT of each column (a real or complex grid).
    CMat forward(const CMat& grids) const;
    /// Unnormalized inverse DFT of each column.
    CMat backward(const CMat& grids) const;

private:
    Eigen::Vector3i res_;
    void* fwd_ = nullptr;
    void* bwd_ = nullptr;
};

/// y = Re(IFFT(mirror_scatter(W . FFT(x)))) / V, column c of x/y being one
/// channel. Also exposed piecewise for the autodiff wrapper.
Mat spectral_conv(const FftPlan3d& plan, const SpectralKernel& kernel,
                  const Mat& field);

/// Retained-mode coefficients of each input channel: n_modes x cin.
CMat spectral_mode_coeffs(const FftPlan3d& plan, const SpectralKernel& kernel,
                          const Mat& field);

/// Inverse of the scatter step alone: place mixed coefficients (n_modes x
/// cout), mirror-conjugate them, inverse transform and take the real part.
Mat spectral_scatter_ifft(const FftPlan3d& plan, const SpectralKernel& kernel,
                          const CMat& mixed);

/// Adjoint of spectral_scatter_ifft against a real upstream gradient:
/// FFT(grad) / V gathered at the retained modes, doubled wherever the
/// mirrored slot is distinct. Requires 2 * modes[j] <= res[j] per axis so
/// retained slots never collide with mirrors.
CMat spectral_conv_grad_mixed(const FftPlan3d& plan,
                              const SpectralKernel& kernel,
                              const Mat& grad_out);

/// Adjoint of spectral_mode_coeffs: scatter coefficient gradients onto their
/// slots (no mirroring), inverse transform without normalization, take the
/// real part.
Mat spectral_conv_grad_field(const FftPlan3d& plan,
                             const SpectralKernel& kernel,
                             const CMat& grad_coeffs);

} // namespace hsdop
