#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "hsdop/metrics.hpp"
#include "hsdop/rng.hpp"
#include "test_util.hpp"

using namespace hsdop;

namespace {

struct Fx {
    DecOperators ops;
    SpectralSubspace sub;
};

/// Torus fixture with the subspace built at the requested degree.
Fx make_fx(int nx, int ny, int degree, int m) {
    auto ptr = std::make_shared<const OrientedSimplicialComplex>(
        make_torus_grid(nx, ny));
    Fx f;
    f.ops = assemble_dec(ptr, StarMode::barycentric);
    auto sk = eigensolve(f.ops, degree, m, EigenMethod::dense);
    if (degree == 0) {
        auto s1 = eigensolve(f.ops, 1, m, EigenMethod::dense);
        f.sub = build_subspace(f.ops, sk, &s1, nullptr);
    } else if (degree == 1) {
        auto s2 = eigensolve(f.ops, 2, m, EigenMethod::dense);
        auto s0 = eigensolve(f.ops, 0, m, EigenMethod::dense);
        f.sub = build_subspace(f.ops, sk, &s2, &s0);
    } else {
        auto s1 = eigensolve(f.ops, 1, m, EigenMethod::dense);
        f.sub = build_subspace(f.ops, sk, nullptr, &s1);
    }
    return f;
}

const Fx& fx1() {
    static Fx f = make_fx(6, 6, 1, 8);
    return f;
}

const Fx& fx0() {
    static Fx f = make_fx(8, 8, 0, 6);
    return f;
}

Cochain random_cochain(const DecOperators& ops, int degree, unsigned seed) {
    std::mt19937_64 rng(seed);
    return Cochain{degree, testutil::random_vec(rng, ops.complex->count(degree))};
}

/// Sum of the harmonic basis columns: an exactly representable harmonic
/// representative.
Vec harmonic_combo(const SpectralSubspace& sub) {
    Vec h = Vec::Zero(sub.spec.basis.rows());
    for (int i = 0; i < sub.truncation(); ++i)
        if (sub.harmonic_mask(i) != 0.0) h += sub.spec.basis.col(i);
    return h;
}

} // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("metrics: perfect prediction scores exactly one") {
    const Fx& f = fx1();
    Cochain t = random_cochain(f.ops, 1, 11);
    MetricsReport r = metrics(t, t, f.ops, f.sub);
    CHECK(r.mse == 0.0);
    CHECK(r.spec_fid == 1.0);
    CHECK(r.grad_fid == 1.0);
    CHECK(r.energy_fid == 1.0);
    CHECK(r.enst_fid == 1.0);
    CHECK(r.beta0_score == 1.0);
    CHECK(r.iou == 1.0);
}

TEST_CASE("metrics: perfect scalar prediction, neutral enstrophy") {
    const Fx& f = fx0();
    Cochain t = random_cochain(f.ops, 0, 12);
    MetricsReport r = metrics(t, t, f.ops, f.sub);
    CHECK(r.mse == 0.0);
    CHECK(r.spec_fid == 1.0);
    CHECK(r.grad_fid == 1.0);
    CHECK(r.enst_fid == 1.0);  // not an enstrophy-bearing degree
    CHECK(r.iou == 1.0);
}

TEST_CASE("metrics: dropped component costs exp(-1/3) in beta0") {
    const Fx& f = fx0();
    const auto n0 = f.ops.complex->count(0);
    // Three isolated unit bumps in the target, two in the prediction. The
    // bump vertices are pairwise non-adjacent on the 8x8 torus grid, so each
    // superlevel set splits into one component per bump at every threshold.
    const int v0 = 0, v1 = 3 * 8 + 3, v2 = 6 * 8 + 6;
    Vec gt = Vec::Zero(n0);
    gt(v0) = gt(v1) = gt(v2) = 1.0;
    Vec pr = Vec::Zero(n0);
    pr(v0) = pr(v1) = 1.0;
    MetricsReport r = metrics(Cochain{0, pr}, Cochain{0, gt}, f.ops, f.sub);
    CHECK(r.beta0_score == doctest::Approx(std::exp(-1.0 / 3.0)).epsilon(1e-12));
    CHECK(r.iou == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.mse == doctest::Approx(1.0 / static_cast<double>(n0)).epsilon(1e-12));

    // Sanity of the counting itself.
    CHECK(superlevel_beta0(Cochain{0, gt}, f.ops, 0.5) == 3);
    CHECK(superlevel_beta0(Cochain{0, pr}, f.ops, 0.5) == 2);
    // Two adjacent hot vertices merge into a single component.
    Vec merged = Vec::Zero(n0);
    merged(0) = merged(1) = 1.0;
    CHECK(superlevel_beta0(Cochain{0, merged}, f.ops, 0.5) == 1);
}

TEST_CASE("metrics: constant shift is invisible to derivative fidelities") {
    const Fx& f = fx0();
    // A smooth non-constant target: the first non-harmonic eigenfunction.
    int j = 0;
    while (f.sub.harmonic_mask(j) != 0.0) ++j;
    Vec gt = f.sub.spec.basis.col(j);
    Vec pr = gt.array() + 0.37;
    MetricsReport r = metrics(Cochain{0, pr}, Cochain{0, gt}, f.ops, f.sub);
    // d(t + c) and d(t) agree to roundoff, not bitwise, so allow epsilon.
    CHECK(r.grad_fid == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.energy_fid == doctest::Approx(1.0).epsilon(1e-12));
    // The shift is harmonic (constant on a connected complex), so the
    // weighted spectral error only picks up roundoff.
    CHECK(r.spec_fid == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.mse == doctest::Approx(0.37 * 0.37).epsilon(1e-12));
}

TEST_CASE("metrics: harmonic-only target uses the absolute fallback") {
    const Fx& f = fx1();
    Vec h = harmonic_combo(f.sub);
    REQUIRE(h.norm() > 1e-8);
    Cochain target{1, h};

    MetricsReport perfect = metrics(target, target, f.ops, f.sub);
    CHECK(perfect.spec_fid == 1.0);
    CHECK(perfect.grad_fid == 1.0);
    CHECK(perfect.energy_fid == 1.0);

    // Coexact noise has nonzero curl, so with a curl-free reference every
    // relative denominator is zero and the absolute branch must engage.
    std::mt19937_64 rng(77);
    Cochain two{2, testutil::random_vec(rng, f.ops.complex->count(2))};
    Vec noise = f.ops.apply_delta(two).values;
    Cochain pred{1, h + 0.5 * noise};
    MetricsReport r = metrics(pred, target, f.ops, f.sub);
    CHECK(r.spec_fid < 1.0);
    CHECK(r.spec_fid > 0.0);
    CHECK(r.grad_fid < 1.0);
    CHECK(r.energy_fid < 1.0);
}

TEST_CASE("metrics: one-form topology scores live on the face graph") {
    const Fx& f = fx1();
    Cochain w = random_cochain(f.ops, 1, 21);
    Vec sv = scoring_values(w, f.ops);
    Vec curl = f.ops.d[1] * w.values;
    CHECK((sv - curl).lpNorm<Eigen::Infinity>() == 0.0);

    // Counting the 1-form and counting its curl as a 2-form must agree:
    // both use face values with shared-edge adjacency.
    Cochain as_two{2, curl};
    for (double thr : {-0.5, 0.0, 0.25, 0.6}) {
        CHECK(superlevel_beta0(w, f.ops, thr) ==
              superlevel_beta0(as_two, f.ops, thr));
    }

    // 0-forms score their own values.
    Cochain z = random_cochain(f.ops, 0, 22);
    CHECK((scoring_values(z, f.ops) - z.values).norm() == 0.0);
}

TEST_CASE("metrics: enstrophy tracks energy for one-forms only") {
    const Fx& f = fx1();
    Cochain t = random_cochain(f.ops, 1, 31);
    Cochain p = random_cochain(f.ops, 1, 32);
    MetricsReport r = metrics(p, t, f.ops, f.sub);
    CHECK(r.enst_fid == r.energy_fid);
    CHECK(r.energy_fid < 1.0);
}

TEST_CASE("metrics: top degree keeps derivative fidelities neutral") {
    static Fx f = make_fx(5, 5, 2, 6);
    Cochain t = random_cochain(f.ops, 2, 41);
    Cochain p = random_cochain(f.ops, 2, 42);
    MetricsReport r = metrics(p, t, f.ops, f.sub);
    CHECK(r.grad_fid == 1.0);
    CHECK(r.energy_fid == 1.0);
    CHECK(r.enst_fid == 1.0);
    CHECK(r.mse > 0.0);
}

TEST_CASE("metrics: input validation") {
    const Fx& f = fx1();
    Cochain t1 = random_cochain(f.ops, 1, 51);
    Cochain t0 = random_cochain(f.ops, 0, 52);
    CHECK_THROWS_AS(metrics(t0, t1, f.ops, f.sub), DegreeMismatch);
    CHECK_THROWS_AS(metrics(t0, t0, f.ops, f.sub), DegreeMismatch);

    Cochain zero{1, Vec::Zero(f.ops.complex->count(1))};
    CHECK_THROWS_AS(metrics(t1, zero, f.ops, f.sub), ZeroNormTarget);

    Cochain bad{1, Vec::Zero(3)};
    CHECK_THROWS_AS(metrics(bad, t1, f.ops, f.sub), DimensionMismatch);
}

TEST_SUITE_END();
