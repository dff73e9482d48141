#pragma once

#include <optional>
#include <vector>

#include "hsdop/dec.hpp"

namespace hsdop {

/// Truncated eigendecomposition of one Hodge Laplacian.
///
/// basis columns phi_i satisfy L_k phi_i = lambda_i phi_i and are orthonormal
/// under the Hodge inner product: Phi^T diag(star_k) Phi = I. Eigenvalues are
/// ascending; harmonic_indices lists the columns whose eigenvalue falls below
/// the relative zero threshold, and their count is the detected Betti number.
struct HodgeSpectrum {
    int degree = 0;
    Vec eigenvalues;
    Mat basis;
    std::vector<int> harmonic_indices;
    double zero_threshold = 0.0;  // absolute threshold that was applied

    int truncation() const { return static_cast<int>(eigenvalues.size()); }
    int betti() const { return static_cast<int>(harmonic_indices.size()); }
};

enum class EigenMethod {
    /// dense for N_k <= 4000, shift_invert above.
    automatic,
    dense,
    shift_invert,
};

/// Smallest-m eigenpairs of L_k via the symmetric reduction
/// S = diag(star)^{1/2} L diag(star)^{-1/2}.
///
/// The dense path runs a full symmetric eigensolve; the shift-invert path
/// runs Lanczos with full reorthogonalization on (S - sigma I)^{-1} with
/// sigma = -1e-6 (so the shifted matrix is positive definite) for at most
/// 50*m iterations, and throws ConvergenceFailure if the m pairs have not
/// converged. tau_zero is the relative harmonic threshold: lambda is treated
/// as zero when lambda < tau_zero * max(lambda_max, 1).
HodgeSpectrum eigensolve(const DecOperators& ops, int degree, int m,
                         EigenMethod method = EigenMethod::automatic,
                         double tau_zero = 1e-8);

/// Expected Betti numbers for the generators with known topology.
struct BettiDiagnostic {
    bool match = true;
    std::vector<int> expected;
    std::vector<int> detected;
    std::string message;
};

/// Compare detected harmonic counts against expectations (one entry per
/// degree; negative entries are skipped).
BettiDiagnostic validate_betti(const std::vector<HodgeSpectrum>& spectra,
                               const std::vector<int>& expected);

/// Spectral coefficient space at one degree, with the compressed exterior
/// derivative / codifferential acting between neighbouring truncations.
struct SpectralSubspace {
    int degree = 0;
    HodgeSpectrum spec;
    Vec star;        // diag of *_k
    Mat M_d;         // m_{k+1} x m_k, or 0 x m
    Mat M_delta;     // m_{k-1} x m_k, or 0 x m
    Vec harmonic_mask;  // size m, 1 at harmonic indices

    int truncation() const { return spec.truncation(); }

    /// c = Phi^T diag(star) w.
    Vec coeffs(const Vec& w) const;
    /// w = Phi c.
    Vec reconstruct(const Vec& c) const;
    /// Pi w = Phi Phi^T diag(star) w.
    Vec project_base(const Vec& w) const;
    /// (I - Pi) w.
    Vec project_fiber(const Vec& w) const;
};

/// Assemble the subspace at spec_k.degree. Neighbour spectra (when supplied)
/// define M_d = Phi_{k+1}^T *_{k+1} d_k Phi_k and
/// M_delta = Phi_{k-1}^T *_{k-1} delta_k Phi_k.
SpectralSubspace build_subspace(const DecOperators& ops, HodgeSpectrum spec_k,
                                const HodgeSpectrum* spec_up = nullptr,
                                const HodgeSpectrum* spec_down = nullptr);

/// Exact / coexact / harmonic parts of a cochain, via weighted least squares
/// against im(d_{k-1}) and im(delta_{k+1}).
struct HodgeDecomposition {
    Cochain exact;
    Cochain coexact;
    Cochain harmonic;
};

HodgeDecomposition hodge_decompose(const DecOperators& ops, const Cochain& w);

} // namespace hsdop
