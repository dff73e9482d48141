#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsdop/spectrum.hpp"

namespace hsdop {

enum class TaskKind { toroidal_transport, poisson_field, harmonic_recovery };

std::string task_name(TaskKind kind);
TaskKind task_from(const std::string& name);

/// Vector tasks target 1-cochains; scalar tasks target 0-cochains. The loss
/// and the model weight-decay default switch on this.
bool is_vector_task(TaskKind kind);

/// One (input, reference solution) pair on a fixed complex.
struct Sample {
    Cochain input;
    Cochain target;
    std::uint64_t seed = 0;
};

/// Generation settings for every task family, a superset so one struct maps
/// onto the CLI config. Fields irrelevant to a task are ignored by it.
struct TaskConfig {
    TaskKind kind = TaskKind::harmonic_recovery;
    int nx = 12;  // torus grid dimensions
    int ny = 12;
    int n_samples = 200;
    std::uint64_t seed = 0;
    // toroidal_transport
    double nu = 0.01;
    double horizon = 1.0;
    int steps = 50;
    double v_max = 1.0;
    // poisson_field
    bool with_harmonic = false;
    // harmonic_recovery
    double noise_scale = 0.5;
    int low_modes = 6;
};

struct Dataset {
    TaskKind kind = TaskKind::harmonic_recovery;
    TaskConfig config;
    ComplexPtr complex;
    std::string complex_id;  // content hash of the complex
    int input_degree = 0;
    int target_degree = 0;
    std::vector<Sample> samples;
    // Disjoint, exhaustive, seed-deterministic: floor(0.68 n) / floor(0.12 n)
    // / rest.
    std::vector<int> train_idx;
    std::vector<int> val_idx;
    std::vector<int> test_idx;
};

/// Reference transport solver on vertices: explicit first-order upwind
/// advection by the edge flux Q_e = *_1 v_e, then implicit backward-Euler
/// diffusion (*_0 + nu dt B_1 *_1 B_1^T) u = *_0 u_adv per step. Total mass
/// sum(*_0 u) is conserved by both halves up to solver roundoff. Throws
/// CflViolation when max_e(|v_e|/len_e) * dt / min_e(len_e) >= 0.5.
Vec transport_reference(const DecOperators& ops, const Vec& u0,
                        const Vec& velocity, double nu, double horizon,
                        int steps);

/// Divergence-free rotational edge velocity: a fixed mixture of the harmonic
/// 1-forms (both periodic directions), scaled so the pointwise speed
/// max_e |v_e| / len_e equals v_max. Requires b_1 >= 1.
Vec rotational_velocity(const DecOperators& ops, double v_max);

/// Pseudo-solve L_0 phi = rho orthogonal to constants. rho must have
/// star-weighted zero mean (it is projected if not); the returned potential
/// has star-weighted zero mean and residual ||L_0 phi - rho|| below 1e-9
/// relative. Throws NonConnected / SingularSystem.
Vec poisson_potential(const DecOperators& ops, const Vec& rho);

/// Scalar advection-diffusion on a torus: inputs are random low-eigenmode
/// mixtures plus Gaussian bumps, targets their state after the horizon.
Dataset gen_toroidal_transport(const TaskConfig& cfg);

/// Scalar source to field: input a mean-zero vertex source rho, target the
/// 1-cochain B = -d_0 phi with L_0 phi = rho (plus an optional random
/// harmonic component when with_harmonic and b_1 > 0).
Dataset gen_poisson_field(const TaskConfig& cfg);

/// Denoising toward topology: input = harmonic 1-form + low-mode exact and
/// coexact noise, target = the harmonic part.
Dataset gen_harmonic_recovery(const TaskConfig& cfg);

/// Dispatch on cfg.kind.
Dataset generate_dataset(const TaskConfig& cfg);

/// Regenerate the same sample seeds on a torus grid with both dimensions
/// scaled by factor (rounded), for zero-shot resolution-transfer studies.
Dataset refine_and_transfer(const TaskConfig& cfg, double factor);

/// Writes dir/dataset.json (manifest with config, degrees, complex hash),
/// dir/complex.off, and one JSON-lines file per split (train/val/test.jsonl,
/// each line {seed, input: {degree, values}, target: {...}}).
void save_dataset(const Dataset& ds, const std::string& dir);

/// Rebuilds the dataset from save_dataset output. The complex is reloaded
/// from complex.off and its content hash must match the manifest.
Dataset load_dataset(const std::string& dir);

} // namespace hsdop
