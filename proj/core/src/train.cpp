#include "hsdop/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <thread>

#include "hsdop/rng.hpp"

namespace hsdop {

namespace {

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

int bounded(std::mt19937_64& rng, int n) {
    int j = static_cast<int>(uniform01(rng) * n);
    return std::min(j, n - 1);
}

int worker_threads() {
    const char* env = std::getenv("HSDOP_THREADS");
    if (env == nullptr || *env == '\0') return 1;
    const int t = std::atoi(env);
    return t < 1 ? 1 : t;
}

/// Runs fn(0..n-1) on up to HSDOP_THREADS workers. Work items must write
/// only to their own slots; callers reduce sequentially afterwards, so the
/// thread count never changes the arithmetic of a reduction.
void parallel_for(int n, const std::function<void(int)>& fn) {
    const int threads = std::min(worker_threads(), n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;
    auto body = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                failed.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

double star_sq(const Vec& star, const Vec& v) {
    return (v.array().square() * star.array()).sum();
}

/// Everything the per-sample loss needs that does not change across steps.
struct LossCtx {
    bool vector = false;
    const DecOperators* dec = nullptr;
    const SpectralSubspace* sub = nullptr;
    int k = 0;
    Vec star_k;
    Vec star_down;  // *_{k-1}, used by the divergence penalty
    Mat coeffT;     // Phi^T *_k, for the scalar L1 regularizer
};

LossCtx make_ctx(const HsdModel& model, TaskKind kind) {
    LossCtx ctx;
    ctx.vector = is_vector_task(kind);
    ctx.dec = &model.dec();
    ctx.sub = &model.subspace();
    ctx.k = model.config().degree;
    ctx.star_k = ctx.dec->stars[static_cast<std::size_t>(ctx.k)].diag;
    if (ctx.vector && ctx.k >= 1)
        ctx.star_down = ctx.dec->stars[static_cast<std::size_t>(ctx.k - 1)].diag;
    if (!ctx.vector)
        ctx.coeffT = ctx.sub->spec.basis.transpose() * ctx.sub->star.asDiagonal();
    return ctx;
}

/// Builds the traced loss for one sample, runs backward, and adds the
/// parameter gradient into grad_out (flat layout of the store manifest).
double traced_loss(const HsdModel& model, const Sample& s, const Cochain& w0,
                   double tn2, const TrainConfig& cfg, const LossCtx& ctx,
                   Vec& grad_out) {
    ad::Tape tape;
    std::vector<ad::Var> pv;
    const Cochain* cond = model.config().cond_degree >= 0 ? &s.input : nullptr;
    const ad::Var out = model.forward_traced(tape, w0, cond, &pv);
    const ad::Var diff = tape.sub(out, tape.constant(s.target.values));
    const ad::Var data = tape.sumsq_weighted(ctx.star_k, diff);
    ad::Var total = tape.scale(data, (ctx.vector ? cfg.lambda_flux : 1.0) / tn2);
    if (ctx.vector && ctx.k >= 1 && cfg.lambda_div != 0.0) {
        const ad::Var dv = tape.sparse_matmul(
            &ctx.dec->delta[static_cast<std::size_t>(ctx.k)], out);
        total = tape.add(
            total, tape.scale(tape.sumsq_weighted(ctx.star_down, dv),
                              cfg.lambda_div));
    }
    if (!ctx.vector && cfg.l1_coeff != 0.0) {
        const ad::Var c = tape.matmul_const(&ctx.coeffT, out);
        total = tape.add(total, tape.scale(tape.l1(c), cfg.l1_coeff));
    }
    tape.backward(total);
    const auto& manifest = model.params().manifest();
    grad_out.setZero();
    for (std::size_t t = 0; t < manifest.size(); ++t) {
        const Mat& g = tape.grad(pv[t]);
        grad_out.segment(manifest[t].offset, manifest[t].size()) +=
            Eigen::Map<const Vec>(g.data(), g.size());
    }
    return tape.value(total)(0, 0);
}

} // namespace

double default_weight_decay(TaskKind kind) {
    return is_vector_task(kind) ? 1e-4 : 1e-5;
}

double loss(const Cochain& pred, const Cochain& target,
            const DecOperators& dec, TaskKind kind,
            const SpectralSubspace* sub, double lambda_flux,
            double lambda_div, double l1_coeff) {
    check_degree(*dec.complex, pred, "loss");
    check_degree(*dec.complex, target, "loss");
    if (pred.degree != target.degree)
        throw DegreeMismatch("loss: prediction and target degree differ");
    const int k = pred.degree;
    const Vec& star = dec.stars[static_cast<std::size_t>(k)].diag;
    const double tn2 = star_sq(star, target.values);
    if (tn2 == 0.0) throw ZeroNormTarget("loss: target has zero norm");
    const Vec diff = pred.values - target.values;
    const double rel = star_sq(star, diff) / tn2;
    if (is_vector_task(kind)) {
        double div2 = 0.0;
        if (k >= 1) {
            const Cochain dv = dec.apply_delta(pred);
            div2 = star_sq(dec.stars[static_cast<std::size_t>(k - 1)].diag,
                           dv.values);
        }
        return lambda_flux * rel + lambda_div * div2;
    }
    double l1 = 0.0;
    if (sub != nullptr) {
        if (sub->degree != k)
            throw DegreeMismatch("loss: subspace degree differs from cochains");
        l1 = sub->coeffs(pred.values).lpNorm<1>();
    }
    return rel + l1_coeff * l1;
}

Cochain initial_state(const Sample& s, const HsdModel& model) {
    const int k = model.config().degree;
    const DecOperators& dec = model.dec();
    check_degree(*dec.complex, s.input, "initial_state");
    const SpectralSubspace& sub = model.subspace();
    if (s.input.degree == k)
        return Cochain{k, sub.project_base(s.input.values)};
    if (s.input.degree == k - 1) {
        const Vec raised =
            dec.d[static_cast<std::size_t>(k - 1)] * s.input.values;
        return Cochain{k, sub.project_base(raised)};
    }
    throw ConfigError("initial_state: input degree " +
                      std::to_string(s.input.degree) +
                      " cannot seed a degree-" + std::to_string(k) + " model");
}

TrainHistory fit(HsdModel& model, const Dataset& ds, const TrainConfig& cfg) {
    if (cfg.epochs < 1 || cfg.batch < 1)
        throw ConfigError("fit: epochs and batch must be positive");
    if (cfg.lr < 0.0 || cfg.weight_decay < 0.0 || cfg.lambda_flux < 0.0 ||
        cfg.lambda_div < 0.0 || cfg.l1_coeff < 0.0)
        throw ConfigError("fit: negative rate or penalty weight");
    const ModelConfig& mc = model.config();
    if (ds.target_degree != mc.degree)
        throw ConfigError("fit: dataset target degree " +
                          std::to_string(ds.target_degree) +
                          " does not match model degree " +
                          std::to_string(mc.degree));
    if (mc.cond_degree >= 0 && mc.cond_degree != ds.input_degree)
        throw ConfigError("fit: dataset input degree " +
                          std::to_string(ds.input_degree) +
                          " does not match conditioning degree " +
                          std::to_string(mc.cond_degree));
    if (ds.train_idx.empty()) throw ConfigError("fit: empty training split");

    const LossCtx ctx = make_ctx(model, ds.kind);
    const int n = static_cast<int>(ds.samples.size());

    // Initial states and target norms are parameter independent; fix them
    // once up front.
    std::vector<Cochain> omega0(static_cast<std::size_t>(n));
    std::vector<double> tn2(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const Sample& s = ds.samples[static_cast<std::size_t>(i)];
        omega0[static_cast<std::size_t>(i)] = initial_state(s, model);
        tn2[static_cast<std::size_t>(i)] = star_sq(ctx.star_k, s.target.values);
        if (tn2[static_cast<std::size_t>(i)] <= 0.0)
            throw ZeroNormTarget("fit: sample " + std::to_string(i) +
                                 " target has zero norm");
    }
    auto cond_for = [&](int i) -> const Cochain* {
        return mc.cond_degree >= 0
                   ? &ds.samples[static_cast<std::size_t>(i)].input
                   : nullptr;
    };

    ParameterStore& store = model.params();
    Vec& theta = store.flat();
    const Eigen::Index P = theta.size();
    Vec m1 = Vec::Zero(P);
    Vec m2 = Vec::Zero(P);
    long tstep = 0;
    Vec grad(P);

    const int n_train = static_cast<int>(ds.train_idx.size());
    std::vector<int> order = ds.train_idx;
    const int max_batch = std::min(cfg.batch, n_train);
    std::vector<Vec> slot_grad(static_cast<std::size_t>(max_batch), Vec(P));
    std::vector<double> slot_loss(static_cast<std::size_t>(max_batch), 0.0);

    TrainHistory hist;
    Vec best = theta;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr_e =
            cfg.lr * 0.5 * (1.0 + std::cos(M_PI * epoch / cfg.epochs));
        std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        for (int i = n_train - 1; i > 0; --i) {
            const int k = bounded(rng, i + 1);
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(k)]);
        }
        double epoch_sum = 0.0;
        for (int start = 0; start < n_train; start += cfg.batch) {
            const int bs = std::min(cfg.batch, n_train - start);
            parallel_for(bs, [&](int s) {
                const int i = order[static_cast<std::size_t>(start + s)];
                slot_loss[static_cast<std::size_t>(s)] = traced_loss(
                    model, ds.samples[static_cast<std::size_t>(i)],
                    omega0[static_cast<std::size_t>(i)],
                    tn2[static_cast<std::size_t>(i)], cfg, ctx,
                    slot_grad[static_cast<std::size_t>(s)]);
            });
            grad.setZero();
            double raw = 0.0;
            for (int s = 0; s < bs; ++s) {
                raw += slot_loss[static_cast<std::size_t>(s)];
                grad += slot_grad[static_cast<std::size_t>(s)];
            }
            const double batch_loss = raw / bs;
            if (!std::isfinite(batch_loss))
                throw NonFiniteLoss(
                    "fit: batch loss " + std::to_string(batch_loss) +
                    " at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(start / cfg.batch));
            epoch_sum += raw;
            grad /= static_cast<double>(bs);

            ++tstep;
            m1 = 0.9 * m1 + 0.1 * grad;
            m2 = 0.999 * m2 + 0.001 * grad.cwiseProduct(grad);
            const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(tstep));
            const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(tstep));
            // Decoupled update: theta -= lr (m^ / (sqrt(v^) + eps) + wd theta).
            theta.array() -= lr_e * ((m1.array() / bc1) /
                                         ((m2.array() / bc2).sqrt() + 1e-8) +
                                     cfg.weight_decay * theta.array());
        }
        const double train_mean = epoch_sum / n_train;
        double val = train_mean;  // fallback when the val split is empty
        if (!ds.val_idx.empty()) {
            const int nv = static_cast<int>(ds.val_idx.size());
            std::vector<double> vloss(static_cast<std::size_t>(nv), 0.0);
            parallel_for(nv, [&](int j) {
                const int i = ds.val_idx[static_cast<std::size_t>(j)];
                const Cochain pred = model.forward(
                    omega0[static_cast<std::size_t>(i)], cond_for(i));
                vloss[static_cast<std::size_t>(j)] =
                    loss(pred, ds.samples[static_cast<std::size_t>(i)].target,
                         *ctx.dec, ds.kind, ctx.sub, cfg.lambda_flux,
                         cfg.lambda_div, cfg.l1_coeff);
            });
            double vsum = 0.0;
            for (double v : vloss) vsum += v;
            val = vsum / nv;
        }
        hist.epochs.push_back(EpochStats{epoch, train_mean, val});
        if (val < hist.best_val) {
            hist.best_val = val;
            hist.best_epoch = epoch;
            best = theta;
            if (!cfg.checkpoint_prefix.empty()) model.save(cfg.checkpoint_prefix);
        }
    }
    theta = best;

    if (!cfg.history_csv.empty()) {
        std::ofstream out(cfg.history_csv);
        if (!out) throw IoError("fit: cannot write " + cfg.history_csv);
        out << "epoch,train_loss,val_loss\n";
        char line[128];
        for (const EpochStats& e : hist.epochs) {
            std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", e.epoch,
                          e.train_loss, e.val_loss);
            out << line;
        }
    }
    return hist;
}

EvalReport evaluate(const HsdModel& model, const Dataset& ds,
                    const std::vector<int>& idx, double alpha) {
    EvalReport report;
    report.count = static_cast<int>(idx.size());
    if (idx.empty()) return report;
    const DecOperators& dec = model.dec();
    const SpectralSubspace& sub = model.subspace();
    const Vec& star =
        dec.stars[static_cast<std::size_t>(model.config().degree)].diag;

    const int nv = report.count;
    std::vector<MetricsReport> reports(static_cast<std::size_t>(nv));
    std::vector<double> rel(static_cast<std::size_t>(nv), 0.0);
    parallel_for(nv, [&](int j) {
        const Sample& s = ds.samples[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
        const Cochain w0 = initial_state(s, model);
        const Cochain* cond =
            model.config().cond_degree >= 0 ? &s.input : nullptr;
        const Cochain pred = model.forward(w0, cond);
        reports[static_cast<std::size_t>(j)] = metrics(pred, s.target, dec, sub, alpha);
        const double tn = std::sqrt(star_sq(star, s.target.values));
        rel[static_cast<std::size_t>(j)] =
            std::sqrt(star_sq(star, pred.values - s.target.values)) / tn;
    });
    MetricsReport& m = report.mean;
    m = MetricsReport{0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    for (int j = 0; j < nv; ++j) {
        const MetricsReport& r = reports[static_cast<std::size_t>(j)];
        m.mse += r.mse;
        m.grad_fid += r.grad_fid;
        m.spec_fid += r.spec_fid;
        m.energy_fid += r.energy_fid;
        m.enst_fid += r.enst_fid;
        m.beta0_score += r.beta0_score;
        m.iou += r.iou;
        report.rel_l2 += rel[static_cast<std::size_t>(j)];
    }
    const double inv = 1.0 / nv;
    m.mse *= inv;
    m.grad_fid *= inv;
    m.spec_fid *= inv;
    m.energy_fid *= inv;
    m.enst_fid *= inv;
    m.beta0_score *= inv;
    m.iou *= inv;
    report.rel_l2 *= inv;
    return report;
}

std::vector<AblationResult> ablate(const DecOperators& dec,
                                   const SpectralSubspace& sub,
                                   const ModelConfig& model_cfg,
                                   const Dataset& ds, const TrainConfig& cfg,
                                   const std::vector<AblationVariant>& variants) {
    std::vector<AblationResult> results;
    results.reserve(variants.size());
    for (AblationVariant v : variants) {
        ModelConfig mc = model_cfg;
        mc.variant = v;
        HsdModel model(&dec, &sub, mc, cfg.seed);
        TrainConfig tc = cfg;
        // Keep per-variant artifacts from clobbering each other.
        if (!tc.checkpoint_prefix.empty())
            tc.checkpoint_prefix += "." + variant_name(v);
        if (!tc.history_csv.empty()) tc.history_csv += "." + variant_name(v);
        AblationResult r;
        r.variant = v;
        r.history = fit(model, ds, tc);
        const EvalReport ev = evaluate(model, ds, ds.val_idx);
        r.val_mse = ev.mean.mse;
        r.val_rel_l2 = ev.rel_l2;
        results.push_back(std::move(r));
    }
    return results;
}

} // namespace hsdop
