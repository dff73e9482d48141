#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hsdop/ambient.hpp"
#include "hsdop/autodiff.hpp"
#include "hsdop/params.hpp"
#include "hsdop/spectrum.hpp"

namespace hsdop {

enum class AblationVariant { full, no_corrector, no_projection };

std::string variant_name(AblationVariant v);
AblationVariant variant_from(const std::string& s);
std::string kernel_name(LiftKernel k);
LiftKernel kernel_from(const std::string& s);

struct ModelConfig {
    int degree = 1;        // cochain degree the model maps
    int cond_degree = -1;  // conditioning cochain degree, -1 for none
    int layers = 2;
    int base_hidden = 32;
    int fiber_depth = 3;
    int fiber_hidden = 12;
    int corrector_hidden = 32;
    Eigen::Vector3i grid_res = Eigen::Vector3i::Constant(16);
    Eigen::Vector3i modes = Eigen::Vector3i::Constant(4);
    LiftKernel kernel = LiftKernel::trilinear_hat;
    double kernel_eps = 0.0;  // gaussian bandwidth, ignored by trilinear_hat
    AblationVariant variant = AblationVariant::full;
};

/// Intermediate values of one layer, for invariant checks and diagnostics.
struct LayerDiag {
    Vec coeffs_in;   // spectral coefficients entering the layer
    Vec coeffs_out;  // gated + harmonic-pinned coefficients
    Vec fiber;       // projected fiber contribution, cochain values
    Vec corrector;   // projected corrector contribution, cochain values
    Vec omega;       // state after the layer
};

/// Structure-preserving operator: a truncated spectral base channel with a
/// hard harmonic constraint, plus an ambient grid channel (lift, truncated
/// spectral convolutions, pullback) and a per-simplex corrector, both kept
/// Hodge-orthogonal to the base subspace.
///
/// Parameter shapes depend only on the truncation m, the grid resolution,
/// and channel counts, never on simplex counts, so one parameter set
/// transfers across meshes via rebind().
class HsdModel {
public:
    /// Builds mesh-bound state and randomly initializes parameters
    /// (Gaussian, stddev 1/sqrt(fan_in); corrector output layer zero).
    HsdModel(const DecOperators* dec, const SpectralSubspace* sub,
             const ModelConfig& cfg, std::uint64_t seed);

    /// Rebuilds grid, lifts, and projection matrices against a different
    /// complex/subspace with the same truncation; parameters are kept.
    void rebind(const DecOperators* dec, const SpectralSubspace* sub);

    Cochain forward(const Cochain& w0, const Cochain* cond = nullptr,
                    std::vector<LayerDiag>* diag = nullptr) const;

    /// Builds the forward graph on the caller's tape and returns the output
    /// variable. param_vars (when non-null) receives one Var per parameter
    /// tensor in manifest order. The tape must not outlive this model or a
    /// subsequent rebind().
    ad::Var forward_traced(ad::Tape& tape, const Cochain& w0,
                           const Cochain* cond,
                           std::vector<ad::Var>* param_vars,
                           std::vector<LayerDiag>* diag = nullptr) const;

    ParameterStore& params() { return store_; }
    const ParameterStore& params() const { return store_; }
    const ModelConfig& config() const { return cfg_; }
    const SpectralSubspace& subspace() const { return *sub_; }
    const DecOperators& dec() const { return *dec_; }
    const LiftOperator& lift() const { return lift_; }

    /// Checkpoint pair <prefix>.json / <prefix>.bin with the config embedded
    /// in the metadata.
    void save(const std::string& prefix) const;
    static HsdModel load(const std::string& prefix, const DecOperators* dec,
                         const SpectralSubspace* sub);

private:
    void bind(const DecOperators* dec, const SpectralSubspace* sub);
    void init_params(std::uint64_t seed);
    ad::Var project_perp(ad::Tape& tape, ad::Var x) const;

    ModelConfig cfg_;
    const DecOperators* dec_ = nullptr;
    const SpectralSubspace* sub_ = nullptr;

    AmbientGrid grid_;
    LiftOperator lift_;       // degree cfg_.degree
    LiftOperator lift_cond_;  // degree cfg_.cond_degree, when conditioned
    std::unique_ptr<FftPlan3d> plan_;

    Mat coeff_mat_;  // m x N, Phi^T diag(star)
    Mat recon_mat_;  // N x m, Phi
    Mat md_;         // m_up x m
    Mat mdelta_;     // m_down x m
    Vec keep_;       // 1 - harmonic mask

    ParameterStore store_;
};

/// Residuals of the scalar commutator identity on 0-forms:
/// A = L0(kappa . u) - kappa . (L0 u) must equal B = [L0, diag(kappa)] u
/// with the commutator matrix formed by brute force.
struct CommutatorReport {
    double equivalence_residual = 0.0;  // ||A - B||_inf
    double direct_norm = 0.0;           // ||A||_inf (zero for constant kappa)
};

CommutatorReport commutator_identity_check(const DecOperators& dec,
                                           const Vec& kappa, const Vec& u);

} // namespace hsdop
