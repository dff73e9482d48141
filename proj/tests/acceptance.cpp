// Release acceptance suite. Each numbered criterion prints one PASS/FAIL
// line with its runtime and a short detail string; the process exits
// nonzero if any selected criterion fails.
//
// Usage: acceptance [N ...] [--cli /path/to/hsdop]
// With no numbers, every criterion runs. --cli names the command-line
// binary, needed by the determinism criterion.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hsdop/ambient.hpp"
#include "hsdop/autodiff.hpp"
#include "hsdop/complex.hpp"
#include "hsdop/dec.hpp"
#include "hsdop/errors.hpp"
#include "hsdop/metrics.hpp"
#include "hsdop/model.hpp"
#include "hsdop/rng.hpp"
#include "hsdop/spectrum.hpp"
#include "hsdop/tasks.hpp"
#include "hsdop/train.hpp"
#include "test_util.hpp"

using namespace hsdop;

namespace {

std::string g_cli;  // path to the hsdop binary (criterion 12)

double now_secs() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

std::string fmtg(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double sip(const Vec& star, const Vec& a, const Vec& b) {
    return (a.array() * star.array() * b.array()).sum();
}

double snorm(const Vec& star, const Vec& a) { return std::sqrt(sip(star, a, a)); }

ComplexPtr ptr(OrientedSimplicialComplex c) {
    return std::make_shared<const OrientedSimplicialComplex>(std::move(c));
}

/// The shared truncation rule: m_req clamped per degree, neighbours built
/// whenever they exist.
SpectralSubspace acc_subspace(const DecOperators& ops, int degree, int m_req) {
    const auto& cx = *ops.complex;
    auto clamp = [&](int k) {
        return static_cast<int>(std::min<std::int64_t>(m_req, cx.count(k)));
    };
    HodgeSpectrum sk = eigensolve(ops, degree, clamp(degree));
    HodgeSpectrum up, down;
    const HodgeSpectrum* pu = nullptr;
    const HodgeSpectrum* pd = nullptr;
    if (degree < cx.dim()) {
        up = eigensolve(ops, degree + 1, clamp(degree + 1));
        pu = &up;
    }
    if (degree > 0) {
        down = eigensolve(ops, degree - 1, clamp(degree - 1));
        pd = &down;
    }
    return build_subspace(ops, std::move(sk), pu, pd);
}

std::vector<std::pair<std::string, ComplexPtr>> suite_complexes() {
    std::vector<std::pair<std::string, ComplexPtr>> cs;
    cs.emplace_back("cycle(12)", ptr(generate("cycle(12)")));
    cs.emplace_back("icosphere(1)", ptr(generate("icosphere(1)")));
    cs.emplace_back("torus_grid(8,8)", ptr(generate("torus_grid(8,8)")));
    cs.emplace_back("tet_mesh", ptr(testutil::cube_tet_mesh(2, 2, 2, 0.15)));
    return cs;
}

// 1. Chain-complex exactness and adjointness on four mesh families.
bool c1_exactness(std::string& detail) {
    const double t0 = now_secs();
    double worst_dd = 0.0, worst_adj = 0.0;
    for (const auto& [name, cx] : suite_complexes()) {
        const DecOperators ops = assemble_dec(cx);
        const int dim = cx->dim();
        for (int k = 1; k < dim; ++k) {
            const SpMatI bb = cx->boundary(k) * cx->boundary(k + 1);
            for (int o = 0; o < bb.outerSize(); ++o)
                for (SpMatI::InnerIterator it(bb, o); it; ++it)
                    if (it.value() != 0) {
                        detail = name + ": B_" + std::to_string(k) + " B_" +
                                 std::to_string(k + 1) + " nonzero";
                        return false;
                    }
        }
        for (int k = 0; k + 1 < dim; ++k) {
            const SpMat dd = ops.d[k + 1] * ops.d[k];
            const SpMat ss = ops.delta[k + 1] * ops.delta[k + 2];
            for (int o = 0; o < dd.outerSize(); ++o)
                for (SpMat::InnerIterator it(dd, o); it; ++it)
                    worst_dd = std::max(worst_dd, std::abs(it.value()));
            for (int o = 0; o < ss.outerSize(); ++o)
                for (SpMat::InnerIterator it(ss, o); it; ++it)
                    worst_dd = std::max(worst_dd, std::abs(it.value()));
        }
        std::mt19937_64 rng(12 + dim);
        for (int k = 0; k < dim; ++k)
            for (int rep = 0; rep < 5; ++rep) {
                const Vec a = gaussian_vec(rng, cx->count(k), 1.0);
                const Vec b = gaussian_vec(rng, cx->count(k + 1), 1.0);
                const double lhs = sip(ops.star(k + 1), ops.d[k] * a, b);
                const double rhs = sip(ops.star(k), a, ops.delta[k + 1] * b);
                const double rel = std::abs(lhs - rhs) /
                                   std::max({std::abs(lhs), std::abs(rhs),
                                             1e-300});
                worst_adj = std::max(worst_adj, rel);
            }
    }
    const double dt = now_secs() - t0;
    detail = "d.d max " + fmtg(worst_dd) + ", adjointness max " +
             fmtg(worst_adj);
    if (worst_dd >= 1e-12 || worst_adj >= 1e-12) return false;
    if (dt >= 5.0) {
        detail += ", over the 5s budget";
        return false;
    }
    return true;
}

// 2. Detected harmonic counts across the mesh families at tau = 1e-8.
bool c2_topology(std::string& detail) {
    const double t0 = now_secs();
    struct Case {
        const char* spec;
        std::vector<int> want;
    };
    const Case cases[] = {
        {"cycle(12)", {1, 1}},
        {"icosphere(1)", {1, 0, 1}},
        {"torus_grid(8,8)", {1, 2, 1}},
        {"disjoint_union(cycle(5),cycle(7))", {2, 2}},
    };
    for (const Case& c : cases) {
        const ComplexPtr cx = ptr(generate(c.spec));
        const DecOperators ops = assemble_dec(cx);
        for (int k = 0; k <= cx->dim(); ++k) {
            const int m = static_cast<int>(
                std::min<std::int64_t>(10, cx->count(k)));
            const HodgeSpectrum s =
                eigensolve(ops, k, m, EigenMethod::automatic, 1e-8);
            if (s.betti() != c.want[static_cast<std::size_t>(k)]) {
                detail = std::string(c.spec) + " degree " + std::to_string(k) +
                         ": betti " + std::to_string(s.betti()) + " != " +
                         std::to_string(c.want[static_cast<std::size_t>(k)]);
                return false;
            }
        }
    }
    const double dt = now_secs() - t0;
    detail = "all harmonic counts match";
    if (dt >= 30.0) {
        detail += ", over the 30s budget";
        return false;
    }
    return true;
}

// 3. Hodge decomposition: reconstruction, orthogonality, harmonicity.
bool c3_decomposition(std::string& detail) {
    double worst_rec = 0.0, worst_orth = 0.0, worst_lap = 0.0;
    for (const auto& [name, cx] : suite_complexes()) {
        const DecOperators ops = assemble_dec(cx);
        std::mt19937_64 rng(33);
        for (int i = 0; i < 50; ++i) {
            const int k = i % (cx->dim() + 1);
            const Cochain w{k, gaussian_vec(rng, cx->count(k), 1.0)};
            const HodgeDecomposition parts = hodge_decompose(ops, w);
            const Vec& star = ops.star(k);
            const Vec& e = parts.exact.values;
            const Vec& c = parts.coexact.values;
            const Vec& h = parts.harmonic.values;
            const double nw = snorm(star, w.values);
            const double rec =
                snorm(star, Vec(w.values - (e + c + h))) / nw;
            worst_rec = std::max(worst_rec, rec);
            const Vec* vs[3] = {&e, &c, &h};
            for (int a = 0; a < 3; ++a)
                for (int b = a + 1; b < 3; ++b) {
                    const double na = snorm(star, *vs[a]);
                    const double nb = snorm(star, *vs[b]);
                    // A component at roundoff level has no meaningful
                    // direction to test against.
                    if (na < 1e-12 * nw || nb < 1e-12 * nw) continue;
                    worst_orth = std::max(
                        worst_orth,
                        std::abs(sip(star, *vs[a], *vs[b])) / (na * nb));
                }
            worst_lap = std::max(
                worst_lap, ops.apply_lap(parts.harmonic).values.norm());
        }
    }
    detail = "reconstruction max " + fmtg(worst_rec) + ", orthogonality max " +
             fmtg(worst_orth) + ", |L h| max " + fmtg(worst_lap);
    return worst_rec < 1e-9 && worst_orth < 1e-9 && worst_lap < 1e-7;
}

// 4. Truncated spectral subspace closes on itself.
bool c4_spectral_loop(std::string& detail) {
    const ComplexPtr cx = ptr(generate("torus_grid(8,8)"));
    const DecOperators ops = assemble_dec(cx);
    const HodgeSpectrum s1 = eigensolve(ops, 1, 48);
    const HodgeSpectrum s2 = eigensolve(ops, 2, 48);
    const HodgeSpectrum s0 = eigensolve(ops, 0, 48);
    const SpectralSubspace sub = build_subspace(ops, s1, &s2, &s0);
    const Vec& star2 = ops.star(2);

    std::mt19937_64 rng(44);
    double worst_id = 0.0, worst_proj = 0.0, worst_md = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const Vec c = gaussian_vec(rng, sub.truncation(), 1.0);
        worst_id = std::max(worst_id,
                            (sub.coeffs(sub.reconstruct(c)) - c).norm() /
                                c.norm());

        const Vec w = gaussian_vec(rng, cx->count(1), 1.0);
        const Vec pw = sub.project_base(w);
        worst_proj = std::max(
            worst_proj, (sub.project_base(pw) - pw).norm() /
                            std::max(pw.norm(), 1e-300));
        const Vec v = gaussian_vec(rng, cx->count(1), 1.0);
        const double lhs = sip(ops.star(1), pw, v);
        const double rhs = sip(ops.star(1), w, sub.project_base(v));
        worst_proj = std::max(worst_proj,
                              std::abs(lhs - rhs) /
                                  std::max({std::abs(lhs), std::abs(rhs),
                                            1e-300}));

        const Vec omega = sub.reconstruct(c);
        const Vec want = s2.basis.transpose() *
                         Vec(star2.cwiseProduct(ops.d[1] * omega));
        worst_md = std::max(worst_md,
                            (sub.M_d * c - want).norm() /
                                std::max(want.norm(), 1e-300));
    }
    detail = "coeffs.reconstruct max " + fmtg(worst_id) + ", projector max " +
             fmtg(worst_proj) + ", reduced-d max " + fmtg(worst_md);
    return worst_id < 1e-10 && worst_proj < 1e-10 && worst_md < 1e-10;
}

// 5. Hard harmonic constraint and base-orthogonal side channels.
bool c5_harmonic_constraint(std::string& detail) {
    const ComplexPtr cx = ptr(generate("torus_grid(5,5)"));
    const DecOperators ops = assemble_dec(cx);
    const SpectralSubspace sub = acc_subspace(ops, 1, 8);

    ModelConfig mc;
    mc.degree = 1;
    mc.layers = 2;
    mc.base_hidden = 6;
    mc.fiber_depth = 2;
    mc.fiber_hidden = 4;
    mc.corrector_hidden = 5;
    mc.grid_res = Eigen::Vector3i::Constant(8);
    mc.modes = Eigen::Vector3i::Constant(2);

    double worst_pin = 0.0, worst_orth = 0.0;
    for (int mi = 0; mi < 20; ++mi) {
        HsdModel model(&ops, &sub, mc, 100 + static_cast<std::uint64_t>(mi));
        std::mt19937_64 prng(500 + static_cast<std::uint64_t>(mi));
        for (const auto& spec : model.params().manifest())
            model.params().set(spec.name,
                               gaussian_mat(prng, spec.rows, spec.cols, 0.4));
        std::mt19937_64 irng(900 + static_cast<std::uint64_t>(mi));
        for (int ii = 0; ii < 20; ++ii) {
            const Cochain w0{1, gaussian_vec(irng, cx->count(1), 1.0)};
            const Vec c0 = sub.coeffs(w0.values);
            const double scale = std::max(c0.cwiseAbs().maxCoeff(), 1e-30);

            std::vector<LayerDiag> diag;
            const Cochain out = model.forward(w0, nullptr, &diag);
            const Vec c_out = sub.coeffs(out.values);
            for (int i : sub.spec.harmonic_indices) {
                for (const LayerDiag& d : diag)
                    worst_pin = std::max(
                        worst_pin, std::abs(d.coeffs_out(i) - c0(i)) / scale);
                worst_pin = std::max(worst_pin,
                                     std::abs(c_out(i) - c0(i)) / scale);
            }
            for (const LayerDiag& d : diag) {
                const double nf = snorm(ops.star(1), d.fiber);
                const double nc = snorm(ops.star(1), d.corrector);
                if (nf > 1e-12)
                    worst_orth = std::max(worst_orth,
                                          sub.coeffs(d.fiber).norm() / nf);
                if (nc > 1e-12)
                    worst_orth = std::max(
                        worst_orth, sub.coeffs(d.corrector).norm() / nc);
            }
        }
    }
    detail = "pin max " + fmtg(worst_pin) + ", side-channel projection max " +
             fmtg(worst_orth);
    return worst_pin <= 1e-12 && worst_orth <= 1e-9;
}

// Reference DFT for the truncated-kernel oracle (O(V^2), small grids only).
CMat naive_dft3(const CMat& grids, Eigen::Vector3i res, int sign) {
    const auto V = static_cast<Eigen::Index>(res.x()) * res.y() * res.z();
    auto axis_of = [&](Eigen::Index id, int axis) {
        const int k3 = static_cast<int>(id % res.z());
        const int k2 = static_cast<int>((id / res.z()) % res.y());
        const int k1 = static_cast<int>(
            id / (static_cast<Eigen::Index>(res.y()) * res.z()));
        return axis == 0 ? k1 : (axis == 1 ? k2 : k3);
    };
    CMat out = CMat::Zero(V, grids.cols());
    for (Eigen::Index kid = 0; kid < V; ++kid)
        for (Eigen::Index vid = 0; vid < V; ++vid) {
            double phase = 0.0;
            for (int a = 0; a < 3; ++a)
                phase += 2.0 * M_PI * axis_of(kid, a) * axis_of(vid, a) /
                         res(a);
            out.row(kid) += std::complex<double>(std::cos(phase),
                                                 sign * std::sin(phase)) *
                            grids.row(vid);
        }
    return out;
}

SpectralKernel identity_kernel(Eigen::Vector3i modes, int ch) {
    SpectralKernel k;
    k.modes = modes;
    k.cin = k.cout = ch;
    k.weights = CMat::Zero(k.num_modes(),
                           static_cast<Eigen::Index>(ch) * ch);
    for (Eigen::Index t = 0; t < k.num_modes(); ++t)
        for (int c = 0; c < ch; ++c)
            k.weights(t, static_cast<Eigen::Index>(c) * ch + c) = 1.0;
    return k;
}

// 6. Grid bridge: adjointness, identity kernel, truncated low-pass.
bool c6_ambient(std::string& detail) {
    const ComplexPtr cx = ptr(generate("torus_grid(6,6)"));
    const DecOperators ops = assemble_dec(cx);
    const MeshGeometry geom = compute_geometry(*cx);
    const AmbientGrid grid = make_grid(geom, Eigen::Vector3i(10, 8, 6));

    std::mt19937_64 rng(66);
    double worst_adj = 0.0;
    for (int k = 0; k <= 2; ++k) {
        const LiftOperator lift =
            build_lift(grid, *cx, geom, k,
                       ops.stars[static_cast<std::size_t>(k)]);
        for (int rep = 0; rep < 5; ++rep) {
            const Vec w = gaussian_vec(rng, cx->count(k), 1.0);
            Mat g(grid.num_voxels(), lift.channels);
            for (int ch = 0; ch < lift.channels; ++ch)
                g.col(ch) = gaussian_vec(rng, grid.num_voxels(), 1.0);
            const double lhs =
                grid.voxel_volume * (lift.lift(w).array() * g.array()).sum();
            const double rhs = sip(ops.star(k), w, lift.pullback(g));
            worst_adj = std::max(worst_adj,
                                 std::abs(lhs - rhs) /
                                     std::max({std::abs(lhs), std::abs(rhs),
                                               1e-300}));
        }
    }

    const Eigen::Vector3i res(6, 4, 4);
    FftPlan3d plan(res);
    Mat field(plan.res().prod(), 3);
    for (int ch = 0; ch < 3; ++ch)
        field.col(ch) = gaussian_vec(rng, plan.res().prod(), 1.0);
    const Mat ident = spectral_conv(plan, identity_kernel(res, 3), field);
    const double id_err = (ident - field).norm() / field.norm();

    const Eigen::Vector3i modes(3, 2, 2);
    const Mat low =
        spectral_conv(plan, identity_kernel(modes, 1), field.col(0));
    CMat spec = naive_dft3(field.col(0).cast<std::complex<double>>(), res, -1);
    for (int k1 = 0; k1 < res.x(); ++k1)
        for (int k2 = 0; k2 < res.y(); ++k2)
            for (int k3 = 0; k3 < res.z(); ++k3) {
                const bool in_set =
                    k1 < modes.x() && k2 < modes.y() && k3 < modes.z();
                const int m1 = (res.x() - k1) % res.x();
                const int m2 = (res.y() - k2) % res.y();
                const int m3 = (res.z() - k3) % res.z();
                const bool in_mirror =
                    m1 < modes.x() && m2 < modes.y() && m3 < modes.z();
                if (!in_set && !in_mirror)
                    spec.row((static_cast<Eigen::Index>(k1) * res.y() + k2) *
                                 res.z() +
                             k3)
                        .setZero();
            }
    const CMat ref = naive_dft3(spec, res, +1) /
                     static_cast<double>(res.prod());
    const double low_err =
        (low.col(0).cast<std::complex<double>>() - ref.col(0)).norm() /
        ref.norm();

    detail = "adjointness max " + fmtg(worst_adj) + ", identity " +
             fmtg(id_err) + ", low-pass " + fmtg(low_err);
    return worst_adj < 1e-12 && id_err < 1e-10 && low_err < 1e-8;
}

// 7. Reverse-mode parameter gradients against central differences.
bool c7_gradients(std::string& detail) {
    const double t0 = now_secs();
    TaskConfig tc;
    tc.kind = TaskKind::harmonic_recovery;
    tc.nx = tc.ny = 8;
    tc.n_samples = 2;
    tc.seed = 7;
    const Dataset ds = generate_dataset(tc);
    const DecOperators ops = assemble_dec(ds.complex);
    const SpectralSubspace sub = acc_subspace(ops, 1, 32);

    ModelConfig mc;
    mc.degree = 1;
    mc.cond_degree = 1;
    mc.layers = 2;
    mc.base_hidden = 12;
    mc.fiber_depth = 2;
    mc.fiber_hidden = 6;
    mc.corrector_hidden = 8;
    mc.grid_res = Eigen::Vector3i::Constant(12);
    mc.modes = Eigen::Vector3i::Constant(3);

    HsdModel model(&ops, &sub, mc, 77);
    std::mt19937_64 prng(78);
    for (const auto& spec : model.params().manifest())
        model.params().set(spec.name,
                           gaussian_mat(prng, spec.rows, spec.cols, 0.3));

    const Sample& s = ds.samples[0];
    const Cochain w0{1, sub.project_base(s.input.values)};
    const Cochain& cond = s.input;
    const Vec& star1 = ops.star(1);
    const Vec& star0 = ops.star(0);
    const double tn2 = sip(star1, s.target.values, s.target.values);

    auto plain_loss = [&]() {
        const Cochain pred = model.forward(w0, &cond);
        const Vec diff = pred.values - s.target.values;
        const Vec dv = ops.delta[1] * pred.values;
        return sip(star1, diff, diff) / tn2 + 0.1 * sip(star0, dv, dv);
    };

    // One reverse sweep for every analytic gradient.
    ad::Tape tape;
    std::vector<ad::Var> pvars;
    const ad::Var out = model.forward_traced(tape, w0, &cond, &pvars);
    const ad::Var diff = tape.sub(out, tape.constant(s.target.values));
    ad::Var total = tape.scale(tape.sumsq_weighted(star1, diff), 1.0 / tn2);
    const ad::Var dv = tape.sparse_matmul(&ops.delta[1], out);
    total = tape.add(total, tape.scale(tape.sumsq_weighted(star0, dv), 0.1));
    tape.backward(total);

    const double l_traced = tape.value(total)(0, 0);
    const double l_plain = plain_loss();
    if (std::abs(l_traced - l_plain) >
        1e-12 * std::max(1.0, std::abs(l_plain))) {
        detail = "traced and plain losses disagree";
        return false;
    }

    const auto& manifest = model.params().manifest();
    Vec& theta = model.params().flat();
    const double h = 1e-5;
    double worst = 0.0;
    std::string worst_name;
    std::mt19937_64 crng(79);
    for (std::size_t t = 0; t < manifest.size(); ++t) {
        const auto& spec = manifest[t];
        const Mat& g = tape.grad(pvars[t]);
        for (int rep = 0; rep < 10; ++rep) {
            const auto r = static_cast<Eigen::Index>(crng() %
                                                     static_cast<std::uint64_t>(spec.rows));
            const auto c = static_cast<Eigen::Index>(crng() %
                                                     static_cast<std::uint64_t>(spec.cols));
            const Eigen::Index idx = spec.offset + c * spec.rows + r;
            const double keep = theta(idx);
            theta(idx) = keep + h;
            const double lp = plain_loss();
            theta(idx) = keep - h;
            const double lm = plain_loss();
            theta(idx) = keep;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = g(r, c);
            const double rel = std::abs(an - fd) /
                               std::max({1.0, std::abs(an), std::abs(fd)});
            if (rel > worst) {
                worst = rel;
                worst_name = spec.name;
            }
        }
    }
    const double dt = now_secs() - t0;
    detail = "max rel err " + fmtg(worst) + " (" + worst_name + "), " +
             fmtg(dt) + "s";
    if (worst >= 1e-5) return false;
    if (dt >= 120.0) {
        detail += ", over the 2min budget";
        return false;
    }
    return true;
}

// 8. Diffusion-bracket identity: brute-force equivalence and the
// exactly-zero commutator for constant conductivity.
bool c8_commutator(std::string& detail) {
    const ComplexPtr cx = ptr(generate("torus_grid(6,6)"));
    const DecOperators ops = assemble_dec(cx);
    const auto n0 = cx->count(0);
    std::mt19937_64 rng(88);

    double worst_eq = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        const Vec kappa = gaussian_vec(rng, n0, 1.0);
        const Vec u = gaussian_vec(rng, n0, 1.0);
        const CommutatorReport r = commutator_identity_check(ops, kappa, u);
        worst_eq = std::max(worst_eq, r.equivalence_residual);
    }

    // Scaling by a power of two commutes with rounding, so a constant
    // conductivity of 2 must give a bitwise-zero commutator.
    const Vec kappa2 = Vec::Constant(n0, 2.0);
    const Vec u = gaussian_vec(rng, n0, 1.0);
    const CommutatorReport rc = commutator_identity_check(ops, kappa2, u);

    detail = "equivalence max " + fmtg(worst_eq) + ", constant-kappa norm " +
             fmtg(rc.direct_norm);
    return worst_eq < 1e-12 && rc.direct_norm == 0.0 &&
           rc.equivalence_residual < 1e-12;
}

struct NineRun {
    double rel_l2 = 0.0;
    double mse = 0.0;
};

NineRun run_training(std::uint64_t seed, AblationVariant variant, int epochs,
                     double lr) {
    TaskConfig tc;
    tc.kind = TaskKind::harmonic_recovery;
    tc.nx = tc.ny = 12;
    tc.n_samples = 200;
    tc.seed = seed;
    const Dataset ds = generate_dataset(tc);
    const DecOperators ops = assemble_dec(ds.complex);
    const SpectralSubspace sub = acc_subspace(ops, ds.target_degree, 48);

    ModelConfig mc;
    mc.degree = ds.target_degree;
    mc.cond_degree = ds.input_degree;
    mc.layers = 2;
    mc.base_hidden = 24;
    mc.fiber_depth = 2;
    mc.fiber_hidden = 8;
    mc.corrector_hidden = 16;
    mc.grid_res = Eigen::Vector3i::Constant(12);
    mc.modes = Eigen::Vector3i::Constant(3);
    mc.variant = variant;

    TrainConfig cfg;
    cfg.lr = lr;
    cfg.epochs = epochs;
    cfg.batch = 32;
    cfg.weight_decay = default_weight_decay(ds.kind);
    cfg.seed = seed;

    HsdModel model(&ops, &sub, mc, seed);
    fit(model, ds, cfg);
    const EvalReport ev = evaluate(model, ds, ds.val_idx);
    return {ev.rel_l2, ev.mean.mse};
}

// 9. Training reaches the denoising target and the projection matters.
bool c9_training(std::string& detail) {
    const double t0 = now_secs();
    setenv("HSDOP_THREADS", "4", 0);
    const int epochs = 30;
    const double lr = 4e-3;

    int wins = 0;
    bool all_reached = true;
    std::string rels;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const NineRun full =
            run_training(seed, AblationVariant::full, epochs, lr);
        const NineRun raw =
            run_training(seed, AblationVariant::no_projection, epochs, lr);
        if (full.rel_l2 >= 0.05) all_reached = false;
        if (full.mse <= raw.mse) ++wins;
        rels += (seed ? ", " : "") + fmtg(full.rel_l2);
    }
    const double dt = now_secs() - t0;
    detail = "val rel-L2 [" + rels + "], projection wins " +
             std::to_string(wins) + "/3, " + fmtg(dt) + "s";
    if (!all_reached || wins < 2) return false;
    if (dt >= 900.0) {
        detail += ", over the 15min budget";
        return false;
    }
    return true;
}

// 10. Zero-shot transfer to a finer grid via a recomputed basis.
bool c10_transfer(std::string& detail) {
    setenv("HSDOP_THREADS", "4", 0);
    TaskConfig tc;
    tc.kind = TaskKind::harmonic_recovery;
    tc.nx = tc.ny = 12;
    tc.n_samples = 200;
    tc.seed = 0;
    const Dataset ds = generate_dataset(tc);
    const DecOperators ops = assemble_dec(ds.complex);
    const SpectralSubspace sub = acc_subspace(ops, ds.target_degree, 48);

    ModelConfig mc;
    mc.degree = ds.target_degree;
    mc.cond_degree = ds.input_degree;
    mc.layers = 2;
    mc.base_hidden = 24;
    mc.fiber_depth = 2;
    mc.fiber_hidden = 8;
    mc.corrector_hidden = 16;
    mc.grid_res = Eigen::Vector3i::Constant(12);
    mc.modes = Eigen::Vector3i::Constant(3);

    TrainConfig cfg;
    cfg.lr = 4e-3;
    cfg.epochs = 30;
    cfg.batch = 32;
    cfg.weight_decay = default_weight_decay(ds.kind);
    cfg.seed = 0;

    HsdModel model(&ops, &sub, mc, 0);
    fit(model, ds, cfg);
    const double rel_coarse =
        evaluate(model, ds, ds.test_idx).rel_l2;

    const Dataset fine = refine_and_transfer(tc, 1.5);
    const DecOperators ops18 = assemble_dec(fine.complex);
    const SpectralSubspace sub18 =
        acc_subspace(ops18, fine.target_degree, 48);
    model.rebind(&ops18, &sub18);
    const double rel_fine = evaluate(model, fine, fine.test_idx).rel_l2;

    const double factor = rel_fine / rel_coarse;
    detail = "test rel-L2 " + fmtg(rel_coarse) + " -> " + fmtg(rel_fine) +
             ", inflation " + fmtg(factor) + "x";
    return factor < 3.0;
}

// 11. Metric self-consistency and the dropped-component score.
bool c11_metrics(std::string& detail) {
    const ComplexPtr cx = ptr(generate("torus_grid(8,8)"));
    const DecOperators ops = assemble_dec(cx);
    std::mt19937_64 rng(111);

    double worst = 0.0;
    for (int k = 0; k <= 1; ++k) {
        const SpectralSubspace sub = acc_subspace(ops, k, 12);
        const Cochain w{k, gaussian_vec(rng, cx->count(k), 1.0)};
        const MetricsReport r = metrics(w, w, ops, sub);
        if (r.mse != 0.0) {
            detail = "mse nonzero for pred == target";
            return false;
        }
        worst = std::max({worst, std::abs(r.grad_fid - 1.0),
                          std::abs(r.spec_fid - 1.0),
                          std::abs(r.energy_fid - 1.0),
                          std::abs(r.enst_fid - 1.0),
                          std::abs(r.beta0_score - 1.0),
                          std::abs(r.iou - 1.0)});
    }

    // Three separated unit bumps in the target, two in the prediction:
    // every threshold sees 3 vs 2 components, each contributing exp(-1/3).
    Vec gt = Vec::Zero(cx->count(0));
    gt(0) = gt(27) = gt(54) = 1.0;
    Vec pr = Vec::Zero(cx->count(0));
    pr(0) = pr(27) = 1.0;
    const Cochain gt_c{0, gt}, pr_c{0, pr};
    const int b_gt = superlevel_beta0(gt_c, ops, 0.5);
    const int b_pr = superlevel_beta0(pr_c, ops, 0.5);
    const SpectralSubspace sub0 = acc_subspace(ops, 0, 12);
    const MetricsReport r = metrics(pr_c, gt_c, ops, sub0);
    const double want = std::exp(-1.0 / 3.0);

    detail = "identity deviation max " + fmtg(worst) + ", component counts " +
             std::to_string(b_gt) + " vs " + std::to_string(b_pr) +
             ", score " + fmtg(r.beta0_score);
    return worst <= 1e-12 && b_gt == 3 && b_pr == 2 &&
           std::abs(r.beta0_score - want) <= 1e-12;
}

int run_cmd(const std::string& cmd) {
    return std::system((cmd + " > /dev/null 2>&1").c_str());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 12. Repeated command-line training is byte-identical.
bool c12_determinism(std::string& detail) {
    if (g_cli.empty()) {
        detail = "no --cli path supplied";
        return false;
    }
    char tmpl[] = "/tmp/hsdop_accept_XXXXXX";
    const char* dirp = mkdtemp(tmpl);
    if (!dirp) {
        detail = "mkdtemp failed";
        return false;
    }
    const std::string dir = dirp;
    {
        std::ofstream cfg(dir + "/run.json");
        cfg << R"json({
  "version": 1,
  "task": "harmonic_recovery",
  "complex": "torus_grid(6,6)",
  "m": 12,
  "model": {"layers": 1, "base_hidden": 8, "fiber_depth": 1,
            "fiber_hidden": 4, "corrector_hidden": 6,
            "grid_res": [8, 8, 8], "modes": [2, 2, 2]},
  "dataset": {"n_samples": 12, "seed": 5, "low_modes": 3},
  "train": {"epochs": 5, "batch": 8, "lr": 0.002, "seed": 9}
})json";
    }
    bool ok = true;
    const std::string base = "\"" + g_cli + "\" ";
    if (run_cmd(base + "gen-data -c " + dir + "/run.json -o " + dir +
                "/data") != 0) {
        detail = "gen-data failed";
        ok = false;
    }
    if (ok && run_cmd(base + "train -c " + dir + "/run.json --data " + dir +
                      "/data -o " + dir + "/a") != 0) {
        detail = "first training run failed";
        ok = false;
    }
    if (ok && run_cmd(base + "train -c " + dir + "/run.json --data " + dir +
                      "/data -o " + dir + "/b") != 0) {
        detail = "second training run failed";
        ok = false;
    }
    if (ok) {
        const std::string a = slurp(dir + "/a/history.csv");
        const std::string b = slurp(dir + "/b/history.csv");
        if (a.empty() || a != b) {
            detail = "history CSVs differ";
            ok = false;
        } else {
            detail = "loss histories byte-identical (" +
                     std::to_string(a.size()) + " bytes)";
        }
    }
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> ids;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--cli" && i + 1 < argc) {
            g_cli = argv[++i];
            continue;
        }
        const int id = std::atoi(a.c_str());
        if (id < 1 || id > 12) {
            std::fprintf(stderr, "usage: acceptance [1..12 ...] [--cli path]\n");
            return 1;
        }
        ids.push_back(id);
    }
    if (ids.empty())
        for (int i = 1; i <= 12; ++i) ids.push_back(i);

    struct Entry {
        const char* name;
        bool (*fn)(std::string&);
    };
    static const Entry table[12] = {
        {"exactness", c1_exactness},
        {"topology", c2_topology},
        {"hodge-decomposition", c3_decomposition},
        {"spectral-closed-loop", c4_spectral_loop},
        {"harmonic-constraint", c5_harmonic_constraint},
        {"ambient-bridge", c6_ambient},
        {"gradient-check", c7_gradients},
        {"commutator", c8_commutator},
        {"training-sanity", c9_training},
        {"resolution-transfer", c10_transfer},
        {"metric-consistency", c11_metrics},
        {"determinism", c12_determinism},
    };

    int failures = 0;
    for (int id : ids) {
        const Entry& e = table[id - 1];
        const double t0 = now_secs();
        std::string detail;
        bool ok = false;
        try {
            ok = e.fn(detail);
        } catch (const std::exception& ex) {
            detail = std::string("exception: ") + ex.what();
        }
        std::printf("[%s] %2d %-22s %7.1fs  %s\n", ok ? "PASS" : "FAIL", id,
                    e.name, now_secs() - t0, detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
