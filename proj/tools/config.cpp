#include "config.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>

#include "hsdop/errors.hpp"
#include "hsdop/io.hpp"

namespace hsdop::cli {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                    const std::string& where) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : keys)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError("config: unknown key \"" + item.key() +
                              "\" in " + where);
    }
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

void read_vec3(const json& j, const char* key, std::array<int, 3>& out,
               const std::string& where) {
    if (!j.contains(key)) return;
    const json& a = j.at(key);
    if (!a.is_array() || a.size() != 3)
        throw ConfigError("config: " + where + "." + key +
                          " must be an array of three integers");
    for (int i = 0; i < 3; ++i)
        out[static_cast<std::size_t>(i)] = a.at(static_cast<std::size_t>(i)).get<int>();
}

double resolved_weight_decay(const RunConfig& cfg) {
    if (cfg.weight_decay >= 0.0) return cfg.weight_decay;
    return default_weight_decay(task_from(cfg.task));
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

nlohmann::json RunConfig::to_json() const {
    return json{
        {"version", version},
        {"task", task},
        {"complex", complex_spec},
        {"m", m},
        {"out_dir", out_dir},
        {"model",
         {{"layers", layers},
          {"base_hidden", base_hidden},
          {"fiber_depth", fiber_depth},
          {"fiber_hidden", fiber_hidden},
          {"corrector_hidden", corrector_hidden},
          {"grid_res", grid_res},
          {"modes", modes},
          {"kernel", kernel},
          {"kernel_eps", kernel_eps},
          {"variant", variant}}},
        {"dataset",
         {{"n_samples", n_samples},
          {"seed", data_seed},
          {"nu", nu},
          {"horizon", horizon},
          {"steps", steps},
          {"v_max", v_max},
          {"with_harmonic", with_harmonic},
          {"noise_scale", noise_scale},
          {"low_modes", low_modes}}},
        {"train",
         {{"lr", lr},
          {"epochs", epochs},
          {"batch", batch},
          {"weight_decay", resolved_weight_decay(*this)},
          {"lambda_flux", lambda_flux},
          {"lambda_div", lambda_div},
          {"l1_coeff", l1_coeff},
          {"seed", train_seed}}}};
}

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("config: " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    if (!j.contains("version"))
        throw ConfigError("config: missing required \"version\"");
    if (j.at("version").get<int>() != 1)
        throw ConfigError("config: unsupported version " +
                          j.at("version").dump());
    reject_unknown(
        j, {"version", "task", "complex", "m", "out_dir", "model", "dataset",
            "train"},
        "the top level");
    read_key(j, "task", cfg.task);
    read_key(j, "complex", cfg.complex_spec);
    read_key(j, "m", cfg.m);
    read_key(j, "out_dir", cfg.out_dir);

    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown(m,
                       {"layers", "base_hidden", "fiber_depth", "fiber_hidden",
                        "corrector_hidden", "grid_res", "modes", "kernel",
                        "kernel_eps", "variant"},
                       "\"model\"");
        read_key(m, "layers", cfg.layers);
        read_key(m, "base_hidden", cfg.base_hidden);
        read_key(m, "fiber_depth", cfg.fiber_depth);
        read_key(m, "fiber_hidden", cfg.fiber_hidden);
        read_key(m, "corrector_hidden", cfg.corrector_hidden);
        read_vec3(m, "grid_res", cfg.grid_res, "model");
        read_vec3(m, "modes", cfg.modes, "model");
        read_key(m, "kernel", cfg.kernel);
        read_key(m, "kernel_eps", cfg.kernel_eps);
        read_key(m, "variant", cfg.variant);
    }
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        reject_unknown(d,
                       {"n_samples", "seed", "nu", "horizon", "steps", "v_max",
                        "with_harmonic", "noise_scale", "low_modes"},
                       "\"dataset\"");
        read_key(d, "n_samples", cfg.n_samples);
        read_key(d, "seed", cfg.data_seed);
        read_key(d, "nu", cfg.nu);
        read_key(d, "horizon", cfg.horizon);
        read_key(d, "steps", cfg.steps);
        read_key(d, "v_max", cfg.v_max);
        read_key(d, "with_harmonic", cfg.with_harmonic);
        read_key(d, "noise_scale", cfg.noise_scale);
        read_key(d, "low_modes", cfg.low_modes);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown(t,
                       {"lr", "epochs", "batch", "weight_decay", "lambda_flux",
                        "lambda_div", "l1_coeff", "seed"},
                       "\"train\"");
        read_key(t, "lr", cfg.lr);
        read_key(t, "epochs", cfg.epochs);
        read_key(t, "batch", cfg.batch);
        read_key(t, "weight_decay", cfg.weight_decay);
        read_key(t, "lambda_flux", cfg.lambda_flux);
        read_key(t, "lambda_div", cfg.lambda_div);
        read_key(t, "l1_coeff", cfg.l1_coeff);
        read_key(t, "seed", cfg.train_seed);
    }
    // Validate the enumerations eagerly so mistakes surface at load time.
    task_from(cfg.task);
    variant_from(cfg.variant);
    kernel_from(cfg.kernel);
    if (cfg.m < 1) throw ConfigError("config: m must be positive");
    return cfg;
}

std::string config_hash(const RunConfig& cfg) {
    return hash_string(fnv1a(cfg.to_json().dump()));
}

OrientedSimplicialComplex resolve_complex(const std::string& spec) {
    if (ends_with(spec, ".off")) return load_off(spec);
    if (ends_with(spec, ".node")) {
        std::string ele = spec.substr(0, spec.size() - 5) + ".ele";
        return load_node_ele(spec, ele);
    }
    if (ends_with(spec, ".ele")) {
        std::string node = spec.substr(0, spec.size() - 4) + ".node";
        return load_node_ele(node, spec);
    }
    return generate(spec);
}

TaskConfig task_config(const RunConfig& cfg) {
    TaskConfig tc;
    tc.kind = task_from(cfg.task);
    std::string spec = cfg.complex_spec;
    spec.erase(std::remove(spec.begin(), spec.end(), ' '), spec.end());
    int nx = 0;
    int ny = 0;
    if (std::sscanf(spec.c_str(), "torus_grid(%d,%d)", &nx, &ny) != 2)
        throw ConfigError(
            "config: data generation needs a torus_grid(nx,ny) complex, got " +
            cfg.complex_spec);
    tc.nx = nx;
    tc.ny = ny;
    tc.n_samples = cfg.n_samples;
    tc.seed = cfg.data_seed;
    tc.nu = cfg.nu;
    tc.horizon = cfg.horizon;
    tc.steps = cfg.steps;
    tc.v_max = cfg.v_max;
    tc.with_harmonic = cfg.with_harmonic;
    tc.noise_scale = cfg.noise_scale;
    tc.low_modes = cfg.low_modes;
    return tc;
}

ModelConfig model_config(const RunConfig& cfg, int degree, int cond_degree) {
    ModelConfig mc;
    mc.degree = degree;
    mc.cond_degree = cond_degree;
    mc.layers = cfg.layers;
    mc.base_hidden = cfg.base_hidden;
    mc.fiber_depth = cfg.fiber_depth;
    mc.fiber_hidden = cfg.fiber_hidden;
    mc.corrector_hidden = cfg.corrector_hidden;
    mc.grid_res = Eigen::Vector3i(cfg.grid_res[0], cfg.grid_res[1],
                                  cfg.grid_res[2]);
    mc.modes = Eigen::Vector3i(cfg.modes[0], cfg.modes[1], cfg.modes[2]);
    mc.kernel = kernel_from(cfg.kernel);
    mc.kernel_eps = cfg.kernel_eps;
    mc.variant = variant_from(cfg.variant);
    return mc;
}

TrainConfig train_config(const RunConfig& cfg) {
    TrainConfig tc;
    tc.lr = cfg.lr;
    tc.epochs = cfg.epochs;
    tc.batch = cfg.batch;
    tc.weight_decay = resolved_weight_decay(cfg);
    tc.lambda_flux = cfg.lambda_flux;
    tc.lambda_div = cfg.lambda_div;
    tc.l1_coeff = cfg.l1_coeff;
    tc.seed = cfg.train_seed;
    return tc;
}

} // namespace hsdop::cli
