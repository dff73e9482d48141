#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "hsdop/model.hpp"
#include "hsdop/tasks.hpp"
#include "hsdop/train.hpp"

namespace hsdop::cli {

/// One resolved run configuration: config-file values overlaid with
/// command-line overrides. Its canonical JSON dump feeds the config hash
/// that every output carries.
struct RunConfig {
    int version = 1;
    std::string task = "harmonic_recovery";
    /// Generator spec ("torus_grid(12,12)", "icosphere(1)", ...) or a mesh
    /// path (.off, or .node with a sibling .ele).
    std::string complex_spec = "torus_grid(12,12)";
    int m = 64;  // spectral truncation
    std::string out_dir = ".";

    // model
    int layers = 2;
    int base_hidden = 32;
    int fiber_depth = 3;
    int fiber_hidden = 12;
    int corrector_hidden = 32;
    std::array<int, 3> grid_res = {16, 16, 16};
    std::array<int, 3> modes = {4, 4, 4};
    std::string kernel = "trilinear_hat";
    double kernel_eps = 0.0;
    std::string variant = "full";

    // dataset
    int n_samples = 200;
    std::uint64_t data_seed = 0;
    double nu = 0.01;
    double horizon = 1.0;
    int steps = 50;
    double v_max = 1.0;
    bool with_harmonic = false;
    double noise_scale = 0.5;
    int low_modes = 6;

    // training
    double lr = 1e-3;
    int epochs = 60;
    int batch = 64;
    double weight_decay = -1.0;  // < 0: resolved to the task default
    double lambda_flux = 1.0;
    double lambda_div = 0.1;
    double l1_coeff = 1e-4;
    std::uint64_t train_seed = 0;

    /// Canonical nested form (weight decay resolved), sorted keys.
    nlohmann::json to_json() const;
};

/// Parse and schema-check a config file. The "version" key is required and
/// unknown keys anywhere are rejected (ConfigError). An empty path yields
/// the defaults.
RunConfig load_run_config(const std::string& path);

/// FNV-1a hex digest of the canonical JSON dump.
std::string config_hash(const RunConfig& cfg);

/// Build a complex from a generator spec or load one from a mesh path.
OrientedSimplicialComplex resolve_complex(const std::string& spec);

/// TaskConfig assembled from the run config. The complex spec must be a
/// torus_grid generator (the mesh family the task suite samples on).
TaskConfig task_config(const RunConfig& cfg);

ModelConfig model_config(const RunConfig& cfg, int degree, int cond_degree);

/// TrainConfig with the weight decay resolved; checkpoint and history paths
/// are left empty for the command to fill in.
TrainConfig train_config(const RunConfig& cfg);

} // namespace hsdop::cli
