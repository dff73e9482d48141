#pragma once

#include <limits>
#include <string>
#include <vector>

#include "hsdop/metrics.hpp"
#include "hsdop/model.hpp"
#include "hsdop/tasks.hpp"

namespace hsdop {

struct TrainConfig {
    double lr = 1e-3;
    int epochs = 60;
    int batch = 64;
    /// Decoupled weight decay; the task defaults are 1e-4 for vector tasks
    /// and 1e-5 for scalar tasks (see default_weight_decay).
    double weight_decay = 1e-4;
    double lambda_flux = 1.0;   // vector-task data term weight
    double lambda_div = 0.1;    // vector-task divergence penalty weight
    double l1_coeff = 1e-4;     // scalar-task L1 weight on spectral coeffs
    std::uint64_t seed = 0;
    /// When nonempty, the best-validation parameters are checkpointed here
    /// (prefix.json / prefix.bin).
    std::string checkpoint_prefix;
    /// When nonempty, per-epoch "epoch,train_loss,val_loss" CSV (%.17g).
    std::string history_csv;
};

double default_weight_decay(TaskKind kind);

/// Spec'd task loss on plain cochains.
/// Vector tasks: lambda_flux ||p - t||_*^2 / ||t||_*^2
///             + lambda_div ||delta_1 p||_*^2.
/// Scalar tasks: ||p - t||_*^2 / ||t||_*^2, plus l1_coeff * ||c(p)||_1 when
/// a subspace is supplied (the spectral-coefficient regularizer).
/// Throws DegreeMismatch / ZeroNormTarget.
double loss(const Cochain& pred, const Cochain& target,
            const DecOperators& dec, TaskKind kind,
            const SpectralSubspace* sub = nullptr, double lambda_flux = 1.0,
            double lambda_div = 0.1, double l1_coeff = 1e-4);

/// Model input for a sample: the base projection of the task input, raised
/// by d when the input lives one degree below the model
/// (omega_0 = Pi f or Pi d f). The raw input feeds the conditioning channel.
Cochain initial_state(const Sample& s, const HsdModel& model);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();
};

/// AdamW (decoupled weight decay) with a cosine learning-rate schedule
/// annealed to zero across cfg.epochs. The model ends with the parameters
/// of the best-validation epoch. Bit-deterministic given cfg.seed.
/// Throws NonFiniteLoss with a diagnostic when a batch loss leaves the
/// reals.
TrainHistory fit(HsdModel& model, const Dataset& ds, const TrainConfig& cfg);

/// Mean metrics over one index set of a dataset.
struct EvalReport {
    MetricsReport mean;
    double rel_l2 = 0.0;  // mean ||p - t||_* / ||t||_*
    int count = 0;
};

EvalReport evaluate(const HsdModel& model, const Dataset& ds,
                    const std::vector<int>& idx, double alpha = 1.0);

struct AblationResult {
    AblationVariant variant = AblationVariant::full;
    TrainHistory history;
    double val_mse = 0.0;
    double val_rel_l2 = 0.0;
};

/// Trains one model per variant from the same seed and reports validation
/// scores for the comparison table.
std::vector<AblationResult> ablate(const DecOperators& dec,
                                   const SpectralSubspace& sub,
                                   const ModelConfig& model_cfg,
                                   const Dataset& ds, const TrainConfig& cfg,
                                   const std::vector<AblationVariant>& variants);

} // namespace hsdop
