#pragma once

#include "hsdop/spectrum.hpp"

namespace hsdop {

/// Fidelity suite for one prediction. Fidelities live in (0, 1] and equal
/// 1.0 exactly when pred == target; mse is a plain per-entry mean square.
/// enst_fid applies to 1-form fields (it scores d of the field, which for
/// 1-forms coincides with the energy functional used by energy_fid) and is
/// reported as the neutral 1.0 for 0-form tasks.
struct MetricsReport {
    double mse = 0.0;
    double grad_fid = 1.0;
    double spec_fid = 1.0;
    double energy_fid = 1.0;
    double enst_fid = 1.0;
    double beta0_score = 1.0;
    double iou = 1.0;
};

/// beta_0 (connected-component count) of the super-level set
/// {i : score_i >= threshold} in the scoring graph of w's degree:
/// 0-forms score vertex values on the vertex graph; 1-forms score the
/// circulation d(w) on the face-adjacency graph (faces sharing an edge);
/// other degrees score their own values with shared-facet adjacency.
int superlevel_beta0(const Cochain& w, const DecOperators& dec,
                     double threshold);

/// Scoring values and threshold range used by beta0/iou for a cochain
/// (exposed so thresholds can be reproduced externally).
Vec scoring_values(const Cochain& w, const DecOperators& dec);

/// Full metric suite.
///
/// spec_fid = exp(-alpha ||L^{-1/2}(c_pred - c_gt)|| / ||L^{-1/2} c_gt||)
/// over non-harmonic modes (harmonic eigenvalues are zero and are excluded
/// from the weighting). grad_fid = exp(-||d pred - d gt||_* / ||d gt||_*),
/// energy_fid = exp(-|E(pred) - E(gt)| / E(gt)) with E = <dw, dw>_*.
/// Relative denominators that are exactly zero fall back to the absolute
/// error so a perfect prediction still scores 1.0. beta0_score averages
/// exp(-|b0_pred - b0_gt| / max(b0_gt, 1)) over thresholds at 10%..90% of
/// the target's scoring range; iou thresholds at 50%.
///
/// Throws DegreeMismatch on inconsistent degrees and ZeroNormTarget when
/// ||target||_* == 0.
MetricsReport metrics(const Cochain& pred, const Cochain& target,
                      const DecOperators& dec, const SpectralSubspace& sub,
                      double alpha = 1.0);

} // namespace hsdop
