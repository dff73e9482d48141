#include "hsdop/model.hpp"

#include <unordered_map>

#include <json.hpp>

#include "hsdop/rng.hpp"

namespace hsdop {

std::string variant_name(AblationVariant v) {
    switch (v) {
        case AblationVariant::full: return "full";
        case AblationVariant::no_corrector: return "no_corrector";
        case AblationVariant::no_projection: return "no_projection";
    }
    throw InvalidParameter("unknown ablation variant");
}

AblationVariant variant_from(const std::string& s) {
    if (s == "full") return AblationVariant::full;
    if (s == "no_corrector") return AblationVariant::no_corrector;
    if (s == "no_projection") return AblationVariant::no_projection;
    throw ConfigError("unknown ablation variant: " + s);
}

std::string kernel_name(LiftKernel k) {
    return k == LiftKernel::trilinear_hat ? "trilinear_hat" : "gaussian";
}

LiftKernel kernel_from(const std::string& s) {
    if (s == "trilinear_hat") return LiftKernel::trilinear_hat;
    if (s == "gaussian") return LiftKernel::gaussian;
    throw ConfigError("unknown lift kernel: " + s);
}

HsdModel::HsdModel(const DecOperators* dec, const SpectralSubspace* sub,
                   const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
    bind(dec, sub);
    init_params(seed);
}

void HsdModel::bind(const DecOperators* dec, const SpectralSubspace* sub) {
    if (!dec || !sub) throw InvalidParameter("model: null operators");
    if (sub->degree != cfg_.degree)
        throw ConfigError("model: subspace degree != model degree");
    const int dim = dec->dim();
    if (cfg_.degree < 0 || cfg_.degree > dim)
        throw ConfigError("model: degree out of range for the complex");
    if (cfg_.cond_degree > dim)
        throw ConfigError("model: conditioning degree out of range");
    if (cfg_.layers < 1 || cfg_.base_hidden < 1 || cfg_.fiber_depth < 1 ||
        cfg_.fiber_hidden < 1 || cfg_.corrector_hidden < 1)
        throw ConfigError("model: layer/width settings must be positive");
    if ((2 * cfg_.modes.array() > cfg_.grid_res.array()).any())
        throw ConfigError("model: needs 2 * modes <= grid resolution");
    if (sub->truncation() < 1)
        throw ConfigError("model: empty spectral basis");

    dec_ = dec;
    sub_ = sub;
    MeshGeometry geom = compute_geometry(*dec->complex);
    grid_ = make_grid(geom, cfg_.grid_res);
    lift_ =
        build_lift(grid_, *dec->complex, geom, cfg_.degree,
                   dec->stars[static_cast<std::size_t>(cfg_.degree)],
                   cfg_.kernel, cfg_.kernel_eps);
    if (cfg_.cond_degree >= 0)
        lift_cond_ = build_lift(
            grid_, *dec->complex, geom, cfg_.cond_degree,
            dec->stars[static_cast<std::size_t>(cfg_.cond_degree)], cfg_.kernel,
            cfg_.kernel_eps);
    if (!plan_) plan_ = std::make_unique<FftPlan3d>(cfg_.grid_res);

    coeff_mat_ = sub->spec.basis.transpose() * sub->star.asDiagonal();
    recon_mat_ = sub->spec.basis;
    md_ = sub->M_d;
    mdelta_ = sub->M_delta;
    keep_ = Vec::Ones(sub->truncation()) - sub->harmonic_mask;
}

void HsdModel::rebind(const DecOperators* dec, const SpectralSubspace* sub) {
    if (!dec || !sub) throw InvalidParameter("model: null operators");
    if (sub->truncation() != sub_->truncation() ||
        sub->M_d.rows() != md_.rows() ||
        sub->M_delta.rows() != mdelta_.rows())
        throw ConfigError(
            "model: rebind requires matching spectral truncations");
    bind(dec, sub);
}

void HsdModel::init_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    const Eigen::Index m = sub_->truncation();
    const Eigen::Index q_dim = m + md_.rows() + mdelta_.rows();
    const int chk = lift_.channels;
    const int cin =
        chk + 1 + (cfg_.cond_degree >= 0 ? lift_cond_.channels : 0);
    const int hb = cfg_.base_hidden;
    const int hf = cfg_.fiber_hidden;
    const int hc = cfg_.corrector_hidden;
    const Eigen::Index n_modes = static_cast<Eigen::Index>(cfg_.modes.x()) *
                                 cfg_.modes.y() * cfg_.modes.z();

    auto gauss = [&](Eigen::Index r, Eigen::Index c, Eigen::Index fan_in) {
        return gaussian_mat(rng, r, c, 1.0 / std::sqrt(double(fan_in)));
    };

    store_.add("res_scale", Mat::Constant(1, 1, 1.0));
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        store_.add(pre + "base.Wg", gauss(hb, q_dim, q_dim));
        store_.add(pre + "base.Wc", gauss(hb, q_dim, q_dim));
        store_.add(pre + "base.Wout", gauss(m, hb, hb));
        store_.add(pre + "fiber.enc.W", gauss(cin, hf, cin));
        store_.add(pre + "fiber.enc.b", Mat::Zero(1, hf));
        for (int s = 0; s < cfg_.fiber_depth; ++s) {
            const std::string sp = pre + "fiber.s" + std::to_string(s) + ".";
            store_.add(sp + "spec",
                       gauss(n_modes, 2 * static_cast<Eigen::Index>(hf) * hf,
                             hf));
            store_.add(sp + "mix.W", gauss(hf, hf, hf));
            store_.add(sp + "mix.b", Mat::Zero(1, hf));
        }
        store_.add(pre + "fiber.dec.W", gauss(hf, chk, hf));
        store_.add(pre + "fiber.dec.b", Mat::Zero(1, chk));
        store_.add(pre + "corr.W1", gauss(chk + q_dim, hc, chk + q_dim));
        store_.add(pre + "corr.b1", Mat::Zero(1, hc));
        store_.add(pre + "corr.W2", Mat::Zero(hc, 1));
        store_.add(pre + "corr.b2", Mat::Zero(1, 1));
    }
}

ad::Var HsdModel::project_perp(ad::Tape& tape, ad::Var x) const {
    ad::Var cx = tape.matmul_const(&coeff_mat_, x);
    return tape.sub(x, tape.matmul_const(&recon_mat_, cx));
}

ad::Var HsdModel::forward_traced(ad::Tape& tape, const Cochain& w0,
                                 const Cochain* cond,
                                 std::vector<ad::Var>* param_vars,
                                 std::vector<LayerDiag>* diag) const {
    check_degree(*dec_->complex, w0, "model input");
    if (w0.degree != cfg_.degree)
        throw DegreeMismatch("model input: wrong cochain degree");

    std::unordered_map<std::string, ad::Var> P;
    std::vector<ad::Var> pv;
    pv.reserve(store_.manifest().size());
    for (const auto& s : store_.manifest()) {
        ad::Var v = tape.param(store_.get(s.name));
        pv.push_back(v);
        P.emplace(s.name, v);
    }
    if (param_vars) *param_vars = pv;

    const Eigen::Index N = dec_->complex->count(cfg_.degree);
    const Eigen::Index V = grid_.num_voxels();
    const int chk = lift_.channels;
    const Eigen::Index q_dim =
        sub_->truncation() + md_.rows() + mdelta_.rows();

    // Harmonic reference, frozen from the input state.
    Vec c0 = coeff_mat_ * w0.values;
    Mat pin = sub_->harmonic_mask.asDiagonal() * c0;

    ad::Var omega = tape.constant(w0.values);
    ad::Var occ = tape.constant(lift_.occupancy);
    ad::Var cond_field;
    if (cfg_.cond_degree >= 0) {
        if (!cond)
            throw InvalidParameter("model: conditioning cochain required");
        check_degree(*dec_->complex, *cond, "model conditioning");
        if (cond->degree != cfg_.cond_degree)
            throw DegreeMismatch("model conditioning: wrong cochain degree");
        cond_field = tape.constant(lift_cond_.lift(cond->values));
    } else if (cond) {
        throw InvalidParameter("model: unexpected conditioning cochain");
    }

    ad::Var res_scale = P.at("res_scale");

    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";

        // Base channel: gated update in spectral coordinates, then the hard
        // harmonic constraint pins the zero-mode coefficients to the input's.
        ad::Var c = tape.matmul_const(&coeff_mat_, omega);
        std::vector<ad::Var> qparts{c};
        if (md_.rows() > 0) qparts.push_back(tape.matmul_const(&md_, c));
        if (mdelta_.rows() > 0)
            qparts.push_back(tape.matmul_const(&mdelta_, c));
        ad::Var q = qparts.size() == 1 ? c : tape.concat_rows(qparts);
        ad::Var gate = tape.silu(tape.matmul(P.at(pre + "base.Wg"), q));
        ad::Var lin = tape.matmul(P.at(pre + "base.Wc"), q);
        ad::Var ct = tape.add(
            tape.matmul(P.at(pre + "base.Wout"), tape.hadamard(gate, lin)), c);
        ad::Var pinned = tape.add_const(tape.diag_scale(keep_, ct), pin);
        ad::Var wbase = tape.matmul_const(&recon_mat_, pinned);

        // Fiber channel: lift, truncated spectral mixing on the grid,
        // pullback, learnable residual scale, then the orthogonal complement.
        ad::Var lifted =
            tape.reshape(tape.sparse_matmul(&lift_.splat, omega), V, chk);
        std::vector<ad::Var> chans{lifted, occ};
        if (cfg_.cond_degree >= 0) chans.push_back(cond_field);
        ad::Var u = tape.add_rowvec(
            tape.matmul(tape.concat_cols(chans), P.at(pre + "fiber.enc.W")),
            P.at(pre + "fiber.enc.b"));
        for (int s = 0; s < cfg_.fiber_depth; ++s) {
            const std::string sp = pre + "fiber.s" + std::to_string(s) + ".";
            ad::Var conv = tape.spectral_conv(plan_.get(), cfg_.modes,
                                              P.at(sp + "spec"), u);
            ad::Var mix = tape.add_rowvec(tape.matmul(u, P.at(sp + "mix.W")),
                                          P.at(sp + "mix.b"));
            u = tape.silu(tape.add(conv, mix));
        }
        ad::Var y = tape.add_rowvec(tape.matmul(u, P.at(pre + "fiber.dec.W")),
                                    P.at(pre + "fiber.dec.b"));
        ad::Var pb = tape.sparse_matmul(&lift_.pullback_mat,
                                        tape.reshape(y, V * chk, 1));
        ad::Var fib = tape.scalar_mul(res_scale, pb);
        if (cfg_.variant != AblationVariant::no_projection)
            fib = project_perp(tape, fib);

        // Commutator corrector: shared per-simplex perceptron over sampled
        // grid features plus the layer's global gate features.
        ad::Var contrib = fib;
        ad::Var corr;
        if (cfg_.variant != AblationVariant::no_corrector) {
            ad::Var feats = tape.sparse_matmul(&lift_.sample, lifted);
            ad::Var z = tape.concat_cols(
                {feats, tape.broadcast_row(tape.reshape(q, 1, q_dim), N)});
            ad::Var h1 = tape.silu(tape.add_rowvec(
                tape.matmul(z, P.at(pre + "corr.W1")), P.at(pre + "corr.b1")));
            corr = tape.add_rowvec(tape.matmul(h1, P.at(pre + "corr.W2")),
                                   P.at(pre + "corr.b2"));
            if (cfg_.variant != AblationVariant::no_projection)
                corr = project_perp(tape, corr);
            contrib = tape.add(fib, corr);
        }
        omega = tape.add(wbase, contrib);

        if (diag) {
            LayerDiag d;
            d.coeffs_in = tape.value(c);
            d.coeffs_out = tape.value(pinned);
            d.fiber = tape.value(fib);
            d.corrector = corr.valid() ? Vec(tape.value(corr)) : Vec(Vec::Zero(N));
            d.omega = tape.value(omega);
            diag->push_back(std::move(d));
        }
    }
    return omega;
}

Cochain HsdModel::forward(const Cochain& w0, const Cochain* cond,
                          std::vector<LayerDiag>* diag) const {
    ad::Tape tape;
    ad::Var out = forward_traced(tape, w0, cond, nullptr, diag);
    return Cochain{cfg_.degree, Vec(tape.value(out))};
}

void HsdModel::save(const std::string& prefix) const {
    nlohmann::json j;
    j["model"] = {
        {"degree", cfg_.degree},
        {"cond_degree", cfg_.cond_degree},
        {"layers", cfg_.layers},
        {"base_hidden", cfg_.base_hidden},
        {"fiber_depth", cfg_.fiber_depth},
        {"fiber_hidden", cfg_.fiber_hidden},
        {"corrector_hidden", cfg_.corrector_hidden},
        {"grid_res", {cfg_.grid_res.x(), cfg_.grid_res.y(), cfg_.grid_res.z()}},
        {"modes", {cfg_.modes.x(), cfg_.modes.y(), cfg_.modes.z()}},
        {"kernel", kernel_name(cfg_.kernel)},
        {"kernel_eps", cfg_.kernel_eps},
        {"variant", variant_name(cfg_.variant)},
        {"truncation", sub_->truncation()},
    };
    save_checkpoint(prefix, store_, j.dump());
}

HsdModel HsdModel::load(const std::string& prefix, const DecOperators* dec,
                        const SpectralSubspace* sub) {
    std::string meta;
    ParameterStore loaded = load_checkpoint(prefix, &meta);
    nlohmann::json j = nlohmann::json::parse(meta);
    if (!j.contains("model"))
        throw ConfigError(prefix + ": checkpoint has no model metadata");
    const auto& m = j["model"];

    ModelConfig cfg;
    cfg.degree = m.at("degree").get<int>();
    cfg.cond_degree = m.at("cond_degree").get<int>();
    cfg.layers = m.at("layers").get<int>();
    cfg.base_hidden = m.at("base_hidden").get<int>();
    cfg.fiber_depth = m.at("fiber_depth").get<int>();
    cfg.fiber_hidden = m.at("fiber_hidden").get<int>();
    cfg.corrector_hidden = m.at("corrector_hidden").get<int>();
    for (int a = 0; a < 3; ++a) {
        cfg.grid_res(a) = m.at("grid_res").at(a).get<int>();
        cfg.modes(a) = m.at("modes").at(a).get<int>();
    }
    cfg.kernel = kernel_from(m.at("kernel").get<std::string>());
    cfg.kernel_eps = m.at("kernel_eps").get<double>();
    cfg.variant = variant_from(m.at("variant").get<std::string>());

    if (sub && m.at("truncation").get<int>() != sub->truncation())
        throw ConfigError(prefix + ": checkpoint truncation " +
                          std::to_string(m.at("truncation").get<int>()) +
                          " != subspace truncation " +
                          std::to_string(sub->truncation()));

    HsdModel model(dec, sub, cfg, 0);
    const auto& want = model.store_.manifest();
    const auto& got = loaded.manifest();
    if (want.size() != got.size())
        throw ConfigError(prefix + ": checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < want.size(); ++i)
        if (want[i].name != got[i].name || want[i].rows != got[i].rows ||
            want[i].cols != got[i].cols)
            throw ConfigError(prefix + ": checkpoint tensor " + got[i].name +
                              " does not match the model layout");
    model.store_ = std::move(loaded);
    return model;
}

CommutatorReport commutator_identity_check(const DecOperators& dec,
                                           const Vec& kappa, const Vec& u) {
    const auto n0 = dec.complex->count(0);
    if (kappa.size() != n0 || u.size() != n0)
        throw DegreeMismatch(
            "commutator check: kappa and u must be 0-cochains on the complex");
    const SpMat& L = dec.lap[0];
    Vec a = L * Vec(kappa.cwiseProduct(u)) - Vec(kappa.cwiseProduct(L * u));

    Mat dense = Mat(L);
    Mat comm = dense * kappa.asDiagonal();
    comm -= kappa.asDiagonal() * dense;
    Vec b = comm * u;

    CommutatorReport r;
    r.equivalence_residual = (a - b).lpNorm<Eigen::Infinity>();
    r.direct_norm = a.lpNorm<Eigen::Infinity>();
    return r;
}

} // namespace hsdop
