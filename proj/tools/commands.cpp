#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsdop/complex.hpp"
#include "hsdop/dec.hpp"
#include "hsdop/errors.hpp"
#include "hsdop/io.hpp"
#include "hsdop/metrics.hpp"
#include "hsdop/model.hpp"
#include "hsdop/params.hpp"
#include "hsdop/spectrum.hpp"
#include "hsdop/tasks.hpp"
#include "hsdop/train.hpp"

namespace hsdop::cli {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

void write_json(const std::string& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

const std::vector<int>& split_indices(const Dataset& ds,
                                      const std::string& split) {
    if (split == "train") return ds.train_idx;
    if (split == "val") return ds.val_idx;
    if (split == "test") return ds.test_idx;
    throw ConfigError("unknown split \"" + split + "\" (train, val, test)");
}

/// Shared subspace rule: one requested truncation m_req, each degree
/// clamped to its simplex count. Train and eval must agree on this so the
/// reduced-operator dimensions entering the parameter shapes match.
SpectralSubspace make_subspace(const DecOperators& ops, int degree,
                               int m_req) {
    const OrientedSimplicialComplex& cx = *ops.complex;
    auto clamp = [&](int k) {
        return static_cast<int>(
            std::min<std::int64_t>(m_req, cx.count(k)));
    };
    HodgeSpectrum spec_k = eigensolve(ops, degree, clamp(degree));
    std::optional<HodgeSpectrum> up, down;
    if (degree < cx.dim()) up = eigensolve(ops, degree + 1, clamp(degree + 1));
    if (degree > 0) down = eigensolve(ops, degree - 1, clamp(degree - 1));
    return build_subspace(ops, std::move(spec_k), up ? &*up : nullptr,
                          down ? &*down : nullptr);
}

/// Everything a checkpointed model needs to stay alive: the model keeps
/// pointers into dec and sub, so both live on the heap beside it.
struct LoadedModel {
    std::unique_ptr<DecOperators> dec;
    std::unique_ptr<SpectralSubspace> sub;
    std::unique_ptr<HsdModel> model;
};

/// Rebuilds the spectral basis on the dataset's complex at the checkpoint's
/// truncation, then restores the model against it. The checkpoint is the
/// architecture authority; the config only has to agree where the model
/// validates it.
LoadedModel load_model_for(const Dataset& ds, const std::string& prefix) {
    std::string meta;
    load_checkpoint(prefix, &meta);
    const json j = json::parse(meta);
    if (!j.contains("model"))
        throw ConfigError(prefix + ": checkpoint has no model metadata");
    const int degree = j["model"].at("degree").get<int>();
    const int m_req = j["model"].at("truncation").get<int>();

    LoadedModel lm;
    lm.dec = std::make_unique<DecOperators>(assemble_dec(ds.complex));
    lm.sub = std::make_unique<SpectralSubspace>(
        make_subspace(*lm.dec, degree, m_req));
    lm.model = std::make_unique<HsdModel>(
        HsdModel::load(prefix, lm.dec.get(), lm.sub.get()));
    return lm;
}

json metrics_json(const MetricsReport& m) {
    return json{
        {"mse", m.mse},
        {"grad_fid", m.grad_fid},
        {"spec_fid", m.spec_fid},
        {"energy_fid", m.energy_fid},
        {"enst_fid", m.enst_fid},
        {"beta0_score", m.beta0_score},
        {"iou", m.iou},
    };
}

double star_ip(const Vec& star, const Vec& a, const Vec& b) {
    return (a.array() * star.array() * b.array()).sum();
}

}  // namespace

int cmd_analyze(const RunConfig& cfg, const AnalyzeOptions& opt) {
    const std::string hash = config_hash(cfg);
    auto cx = std::make_shared<OrientedSimplicialComplex>(
        resolve_complex(cfg.complex_spec));
    const DecOperators ops = assemble_dec(cx);
    const int dim = cx->dim();

    std::vector<int> degrees = opt.degrees;
    if (degrees.empty())
        for (int k = 0; k <= dim; ++k) degrees.push_back(k);
    std::sort(degrees.begin(), degrees.end());
    degrees.erase(std::unique(degrees.begin(), degrees.end()), degrees.end());
    for (int k : degrees)
        if (k < 0 || k > dim)
            throw InvalidParameter("analyze: degree " + std::to_string(k) +
                                   " outside [0, " + std::to_string(dim) + "]");
    if (static_cast<int>(opt.expect.size()) > dim + 1)
        throw InvalidParameter("analyze: --expect has " +
                               std::to_string(opt.expect.size()) +
                               " entries for a dimension-" +
                               std::to_string(dim) + " complex");

    // With an expectation every degree is solved so the check lines up
    // positionally; otherwise only the requested ones.
    std::vector<int> solve = degrees;
    if (!opt.expect.empty()) {
        solve.clear();
        for (int k = 0; k <= dim; ++k) solve.push_back(k);
    }

    const int modes_req = opt.modes > 0 ? opt.modes : cfg.m;
    std::map<int, HodgeSpectrum> spectra;
    for (int k : solve) {
        const int mk = static_cast<int>(
            std::min<std::int64_t>(modes_req, cx->count(k)));
        spectra.emplace(k, eigensolve(ops, k, mk, EigenMethod::automatic,
                                      opt.tau));
    }

    std::printf("config %s\n", hash.c_str());
    std::printf("complex %s: dim %d\n", cfg.complex_spec.c_str(), dim);
    long long euler = 0;
    std::string counts;
    for (int k = 0; k <= dim; ++k) {
        const long long nk = cx->count(k);
        euler += (k % 2 == 0) ? nk : -nk;
        counts += (k ? ", " : "") + std::string("N_") + std::to_string(k) +
                  " = " + std::to_string(nk);
    }
    std::printf("counts %s\n", counts.c_str());
    std::printf("euler characteristic %lld\n", euler);

    for (int k : degrees) {
        const HodgeSpectrum& s = spectra.at(k);
        std::string head;
        const int nh = std::min(8, s.truncation());
        for (int i = 0; i < nh; ++i) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6g", s.eigenvalues(i));
            head += (i ? ", " : "") + std::string(buf);
        }
        std::printf("degree %d: betti %d, eigenvalues [%s%s]\n", k, s.betti(),
                    head.c_str(), s.truncation() > nh ? ", ..." : "");
    }

    std::string betti_line;
    for (const auto& [k, s] : spectra)
        betti_line += (betti_line.empty() ? "" : ", ") +
                      std::to_string(s.betti());
    std::printf("betti [%s]\n", betti_line.c_str());

    if (!opt.expect.empty()) {
        std::vector<HodgeSpectrum> ordered;
        for (int k = 0; k <= dim; ++k) ordered.push_back(spectra.at(k));
        const BettiDiagnostic diag = validate_betti(ordered, opt.expect);
        std::printf("betti check: %s\n", diag.message.c_str());
        if (!diag.match) return 2;
    }
    return 0;
}

int cmd_spectrum(const RunConfig& cfg, const SpectrumOptions& opt) {
    const std::string hash = config_hash(cfg);
    auto cx = std::make_shared<OrientedSimplicialComplex>(
        resolve_complex(cfg.complex_spec));
    const DecOperators ops = assemble_dec(cx);
    if (opt.degree < 0 || opt.degree > cx->dim())
        throw InvalidParameter("spectrum: degree " +
                               std::to_string(opt.degree) + " outside [0, " +
                               std::to_string(cx->dim()) + "]");
    const int modes_req = opt.modes > 0 ? opt.modes : cfg.m;
    const int mk = static_cast<int>(
        std::min<std::int64_t>(modes_req, cx->count(opt.degree)));
    const HodgeSpectrum s = eigensolve(ops, opt.degree, mk);

    json rec{
        {"config_hash", hash},
        {"degree", s.degree},
        {"eigenvalues", std::vector<double>(
                            s.eigenvalues.data(),
                            s.eigenvalues.data() + s.eigenvalues.size())},
        {"betti", s.betti()},
        {"harmonic_indices", s.harmonic_indices},
    };
    if (opt.out.empty()) {
        std::printf("%s\n", rec.dump(2).c_str());
    } else {
        write_json(opt.out, rec);
        std::printf("config %s\n", hash.c_str());
        std::printf("wrote %s (%d modes, betti %d)\n", opt.out.c_str(),
                    s.truncation(), s.betti());
    }
    return 0;
}

int cmd_decompose(const RunConfig& cfg, const DecomposeOptions& opt) {
    const std::string hash = config_hash(cfg);
    auto cx = std::make_shared<OrientedSimplicialComplex>(
        resolve_complex(cfg.complex_spec));
    const DecOperators ops = assemble_dec(cx);
    const Cochain w = load_cochain(opt.cochain_path, *cx);

    const HodgeDecomposition parts = hodge_decompose(ops, w);
    const std::string out_dir = opt.out_dir.empty() ? cfg.out_dir : opt.out_dir;
    ensure_dir(out_dir);
    const std::string stem =
        std::filesystem::path(opt.cochain_path).stem().string();
    const std::string base = out_dir + "/" + stem;
    write_cochain(parts.exact, *cx, base + ".exact.json");
    write_cochain(parts.coexact, *cx, base + ".coexact.json");
    write_cochain(parts.harmonic, *cx, base + ".harmonic.json");

    const Vec& star = ops.star(w.degree);
    const Vec& e = parts.exact.values;
    const Vec& c = parts.coexact.values;
    const Vec& h = parts.harmonic.values;
    const double nw = std::sqrt(star_ip(star, w.values, w.values));
    const double ne = std::sqrt(star_ip(star, e, e));
    const double nc = std::sqrt(star_ip(star, c, c));
    const double nh = std::sqrt(star_ip(star, h, h));
    const Vec resid = w.values - (e + c + h);
    const double res_abs = std::sqrt(star_ip(star, resid, resid));
    const double res_rel = nw > 0 ? res_abs / nw : res_abs;
    const double lap_h = ops.apply_lap(parts.harmonic).values.norm();

    auto pair_ip = [&](const Vec& a, double na, const Vec& b, double nb) {
        const double raw = star_ip(star, a, b);
        const double scale = na * nb;
        return json{{"raw", raw},
                    {"normalized", scale > 0 ? raw / scale : 0.0}};
    };

    const json report{
        {"config_hash", hash},
        {"degree", w.degree},
        {"input", opt.cochain_path},
        {"files",
         {{"exact", base + ".exact.json"},
          {"coexact", base + ".coexact.json"},
          {"harmonic", base + ".harmonic.json"}}},
        {"norms",
         {{"input", nw}, {"exact", ne}, {"coexact", nc}, {"harmonic", nh}}},
        {"inner_products",
         {{"exact_coexact", pair_ip(e, ne, c, nc)},
          {"exact_harmonic", pair_ip(e, ne, h, nh)},
          {"coexact_harmonic", pair_ip(c, nc, h, nh)}}},
        {"reconstruction_residual_rel", res_rel},
        {"harmonic_laplacian_norm", lap_h},
    };
    write_json(base + ".report.json", report);

    std::printf("config %s\n", hash.c_str());
    std::printf("degree %d cochain: |w| = %.6g, exact %.6g, coexact %.6g, "
                "harmonic %.6g\n",
                w.degree, nw, ne, nc, nh);
    std::printf("reconstruction residual %.3g (relative), |L h| = %.3g\n",
                res_rel, lap_h);
    std::printf("report %s\n", (base + ".report.json").c_str());
    return 0;
}

int cmd_gen_data(const RunConfig& cfg, const GenDataOptions& opt) {
    const std::string hash = config_hash(cfg);
    const TaskConfig tc = task_config(cfg);
    const Dataset ds = opt.refine > 0.0 ? refine_and_transfer(tc, opt.refine)
                                        : generate_dataset(tc);
    const std::string out_dir = opt.out_dir.empty() ? cfg.out_dir : opt.out_dir;
    ensure_dir(out_dir);
    save_dataset(ds, out_dir);

    const json report{
        {"config_hash", hash},
        {"task", task_name(ds.kind)},
        {"complex_id", ds.complex_id},
        {"input_degree", ds.input_degree},
        {"target_degree", ds.target_degree},
        {"n_samples", ds.samples.size()},
        {"splits",
         {{"train", ds.train_idx.size()},
          {"val", ds.val_idx.size()},
          {"test", ds.test_idx.size()}}},
        {"refine", opt.refine},
    };
    write_json(out_dir + "/gen_report.json", report);

    std::printf("config %s\n", hash.c_str());
    std::printf("wrote %s: %zu samples of %s (train %zu, val %zu, test %zu)\n",
                out_dir.c_str(), ds.samples.size(),
                task_name(ds.kind).c_str(), ds.train_idx.size(),
                ds.val_idx.size(), ds.test_idx.size());
    return 0;
}

int cmd_train(const RunConfig& cfg, const TrainOptions& opt) {
    const std::string hash = config_hash(cfg);
    const Dataset ds = opt.data_dir.empty() ? generate_dataset(task_config(cfg))
                                            : load_dataset(opt.data_dir);
    if (!opt.data_dir.empty() && task_name(ds.kind) != cfg.task)
        throw ConfigError("config task \"" + cfg.task +
                          "\" does not match dataset task \"" +
                          task_name(ds.kind) + "\"");

    const std::string out_dir = opt.out_dir.empty() ? cfg.out_dir : opt.out_dir;
    ensure_dir(out_dir);

    const DecOperators dec = assemble_dec(ds.complex);
    const SpectralSubspace sub = make_subspace(dec, ds.target_degree, cfg.m);
    const ModelConfig mc = model_config(cfg, ds.target_degree, ds.input_degree);
    TrainConfig tc = train_config(cfg);
    tc.checkpoint_prefix = out_dir + "/model";

    std::printf("config %s\n", hash.c_str());
    std::printf("dataset %s on %s: %zu samples (train %zu, val %zu, test "
                "%zu), truncation %d\n",
                task_name(ds.kind).c_str(), ds.complex_id.c_str(),
                ds.samples.size(), ds.train_idx.size(), ds.val_idx.size(),
                ds.test_idx.size(), sub.truncation());

    HsdModel model(&dec, &sub, mc, tc.seed);
    const TrainHistory hist = fit(model, ds, tc);

    std::string csv = "# config_hash=" + hash + "\n";
    csv += "epoch,train_loss,val_loss\n";
    for (const EpochStats& e : hist.epochs)
        csv += std::to_string(e.epoch) + "," + fmt17(e.train_loss) + "," +
               fmt17(e.val_loss) + "\n";
    const std::string hist_path = out_dir + "/history.csv";
    write_text(hist_path, csv);

    const json report{
        {"config_hash", hash},
        {"task", cfg.task},
        {"variant", cfg.variant},
        {"complex_id", ds.complex_id},
        {"truncation", sub.truncation()},
        {"epochs", hist.epochs.size()},
        {"best_epoch", hist.best_epoch},
        {"best_val", hist.best_val},
        {"checkpoint", tc.checkpoint_prefix},
        {"history_csv", hist_path},
        {"splits",
         {{"train", ds.train_idx.size()},
          {"val", ds.val_idx.size()},
          {"test", ds.test_idx.size()}}},
    };
    write_json(out_dir + "/train_report.json", report);

    std::printf("best epoch %d, val loss %.6g\n", hist.best_epoch,
                hist.best_val);
    std::printf("checkpoint %s, history %s\n", tc.checkpoint_prefix.c_str(),
                hist_path.c_str());
    return 0;
}

int cmd_eval(const RunConfig& cfg, const EvalOptions& opt) {
    const std::string hash = config_hash(cfg);
    const Dataset ds = load_dataset(opt.data_dir);
    const std::vector<int>& idx = split_indices(ds, opt.split);
    const LoadedModel lm = load_model_for(ds, opt.checkpoint);
    const EvalReport r = evaluate(*lm.model, ds, idx);

    json report{
        {"config_hash", hash},
        {"checkpoint", opt.checkpoint},
        {"data", opt.data_dir},
        {"split", opt.split},
        {"count", r.count},
        {"rel_l2", r.rel_l2},
        {"metrics", metrics_json(r.mean)},
    };
    const std::string out = opt.out.empty()
                                ? cfg.out_dir + "/eval_report.json"
                                : opt.out;
    const std::string parent = std::filesystem::path(out).parent_path();
    if (!parent.empty()) ensure_dir(parent);
    write_json(out, report);

    std::printf("config %s\n", hash.c_str());
    std::printf("split %s (%d samples): rel_l2 %.6g, mse %.6g\n",
                opt.split.c_str(), r.count, r.rel_l2, r.mean.mse);
    std::printf("fidelity grad %.4g, spec %.4g, energy %.4g, enst %.4g, "
                "beta0 %.4g, iou %.4g\n",
                r.mean.grad_fid, r.mean.spec_fid, r.mean.energy_fid,
                r.mean.enst_fid, r.mean.beta0_score, r.mean.iou);
    std::printf("report %s\n", out.c_str());
    return 0;
}

int cmd_spectral_energy(const RunConfig& cfg,
                        const SpectralEnergyOptions& opt) {
    const std::string hash = config_hash(cfg);
    const Dataset ds = load_dataset(opt.data_dir);
    const std::vector<int>& idx = split_indices(ds, opt.split);
    if (idx.empty())
        throw ConfigError("spectral-energy: split \"" + opt.split +
                          "\" is empty");

    LoadedModel lm;
    std::unique_ptr<DecOperators> dec_only;
    std::unique_ptr<SpectralSubspace> sub_only;
    const SpectralSubspace* sub = nullptr;
    if (opt.checkpoint.empty()) {
        dec_only = std::make_unique<DecOperators>(assemble_dec(ds.complex));
        sub_only = std::make_unique<SpectralSubspace>(
            make_subspace(*dec_only, ds.target_degree, cfg.m));
        sub = sub_only.get();
    } else {
        lm = load_model_for(ds, opt.checkpoint);
        sub = lm.sub.get();
    }

    const int m = sub->truncation();
    Vec pred_energy = Vec::Zero(m);
    Vec gt_energy = Vec::Zero(m);
    for (int i : idx) {
        const Sample& s = ds.samples[static_cast<std::size_t>(i)];
        const Vec c_gt = sub->coeffs(s.target.values);
        gt_energy.array() += c_gt.array().square();
        if (lm.model) {
            const Cochain w0 = initial_state(s, *lm.model);
            const Cochain* cond =
                lm.model->config().cond_degree >= 0 ? &s.input : nullptr;
            const Vec c_pred = sub->coeffs(lm.model->forward(w0, cond).values);
            pred_energy.array() += c_pred.array().square();
        } else {
            pred_energy.array() += c_gt.array().square();
        }
    }
    pred_energy /= static_cast<double>(idx.size());
    gt_energy /= static_cast<double>(idx.size());

    std::string csv = "# config_hash=" + hash + "\n";
    csv += "lambda,pred_energy,gt_energy\n";
    for (int i = 0; i < m; ++i)
        csv += fmt17(sub->spec.eigenvalues(i)) + "," + fmt17(pred_energy(i)) +
               "," + fmt17(gt_energy(i)) + "\n";
    const std::string out = opt.out.empty()
                                ? cfg.out_dir + "/spectral_energy.csv"
                                : opt.out;
    const std::string parent = std::filesystem::path(out).parent_path();
    if (!parent.empty()) ensure_dir(parent);
    write_text(out, csv);

    std::printf("config %s\n", hash.c_str());
    std::printf("wrote %s (%d modes, %zu samples, %s)\n", out.c_str(), m,
                idx.size(),
                opt.checkpoint.empty() ? "pass-through" : "model prediction");
    return 0;
}

}  // namespace hsdop::cli
