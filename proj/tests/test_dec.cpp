#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "hsdop/dec.hpp"
#include "test_util.hpp"

using namespace hsdop;

namespace {

DecOperators dec_for(OrientedSimplicialComplex c,
                     StarMode mode = StarMode::barycentric) {
    auto ptr = std::make_shared<const OrientedSimplicialComplex>(std::move(c));
    return assemble_dec(ptr, mode);
}

double sparse_max_abs(const SpMat& m) {
    double best = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it)
            best = std::max(best, std::abs(it.value()));
    return best;
}

} // namespace

TEST_SUITE_BEGIN("dec");

TEST_CASE("barycentric stars on the unit right triangle") {
    // Area 1/2 split equally: each vertex gets 1/6 of dual area; each edge
    // share is 1/6, divided by squared length (legs 1, hypotenuse 2).
    auto ops = dec_for(make_triangle());
    CHECK(ops.star(0).size() == 3);
    for (Eigen::Index i = 0; i < 3; ++i)
        CHECK(testutil::rel_err(ops.star(0)(i), 1.0 / 6.0) < 1e-14);
    CHECK(testutil::rel_err(ops.star(2)(0), 2.0) < 1e-14);

    std::vector<double> edge_stars(ops.star(1).data(), ops.star(1).data() + 3);
    std::sort(edge_stars.begin(), edge_stars.end());
    CHECK(testutil::rel_err(edge_stars[0], 1.0 / 12.0) < 1e-14);
    CHECK(testutil::rel_err(edge_stars[1], 1.0 / 6.0) < 1e-14);
    CHECK(testutil::rel_err(edge_stars[2], 1.0 / 6.0) < 1e-14);
}

TEST_CASE("star entries are strictly positive on all test complexes") {
    for (auto* spec : {"torus_grid(6,4)", "icosphere(1)", "cycle(9)",
                       "disjoint_union(triangle,triangle)"}) {
        auto ops = dec_for(generate(spec));
        for (int k = 0; k <= ops.dim(); ++k) CHECK(ops.star(k).minCoeff() > 0.0);
    }
    auto tet = dec_for(testutil::cube_tet_mesh(2, 2, 2, 0.1));
    for (int k = 0; k <= 3; ++k) CHECK(tet.star(k).minCoeff() > 0.0);
}

TEST_CASE("cycle stars match the hand computation") {
    // Unit circle 4-gon: every edge has length sqrt(2); vertex dual share is
    // half an edge from each side.
    auto ops = dec_for(make_cycle(4));
    const double len = std::sqrt(2.0);
    for (Eigen::Index i = 0; i < 4; ++i) {
        CHECK(testutil::rel_err(ops.star(0)(i), len) < 1e-14);
        CHECK(testutil::rel_err(ops.star(1)(i), 1.0 / len) < 1e-14);
    }
}

TEST_CASE("d composed with d vanishes") {
    for (auto* spec : {"torus_grid(5,4)", "icosphere(1)"}) {
        auto ops = dec_for(generate(spec));
        SpMat dd = ops.d[1] * ops.d[0];
        CHECK(sparse_max_abs(dd) < 1e-12);
    }
    auto tet = dec_for(testutil::cube_tet_mesh(2, 1, 1, 0.0));
    CHECK(sparse_max_abs(SpMat(tet.d[1] * tet.d[0])) < 1e-12);
    CHECK(sparse_max_abs(SpMat(tet.d[2] * tet.d[1])) < 1e-12);
}

TEST_CASE("delta composed with delta vanishes") {
    auto ops = dec_for(make_torus_grid(5, 4));
    SpMat dd = ops.delta[1] * ops.delta[2];
    CHECK(sparse_max_abs(dd) < 1e-12);
}

TEST_CASE("codifferential is the Hodge adjoint of d") {
    std::mt19937_64 rng(42);
    for (auto* spec : {"torus_grid(6,5)", "icosphere(1)", "cycle(11)"}) {
        auto ops = dec_for(generate(spec));
        for (int k = 0; k + 1 <= ops.dim(); ++k) {
            for (int trial = 0; trial < 5; ++trial) {
                Cochain a{k, testutil::random_vec(rng, ops.complex->count(k))};
                Cochain b{k + 1,
                          testutil::random_vec(rng, ops.complex->count(k + 1))};
                double lhs = hodge_inner(ops.apply_d(a), b,
                                         ops.stars[static_cast<std::size_t>(k + 1)]);
                double rhs = hodge_inner(a, ops.apply_delta(b),
                                         ops.stars[static_cast<std::size_t>(k)]);
                CHECK(testutil::rel_err(lhs, rhs) < 1e-12);
            }
        }
    }
}

TEST_CASE("identity-star Laplacian of cycle(4) is the circulant graph Laplacian") {
    auto ops = dec_for(make_cycle(4), StarMode::identity);
    Mat L = Mat(ops.lap[0]);
    Mat want(4, 4);
    want << 2, -1, 0, -1, -1, 2, -1, 0, 0, -1, 2, -1, -1, 0, -1, 2;
    CHECK((L - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("Laplacian is self-adjoint under the Hodge inner product") {
    std::mt19937_64 rng(7);
    auto ops = dec_for(make_torus_grid(5, 5));
    for (int k = 0; k <= 2; ++k) {
        // star * L must be a symmetric matrix.
        SpMat sl = ops.star(k).asDiagonal() * ops.lap[static_cast<std::size_t>(k)];
        SpMat asym = SpMat(sl - SpMat(sl.transpose()));
        CHECK(sparse_max_abs(asym) < 1e-12 * std::max(1.0, sparse_max_abs(sl)));

        // And positive semidefinite: <w, L w> >= 0.
        for (int trial = 0; trial < 5; ++trial) {
            Cochain w{k, testutil::random_vec(rng, ops.complex->count(k))};
            double quad = hodge_inner(w, ops.apply_lap(w),
                                      ops.stars[static_cast<std::size_t>(k)]);
            CHECK(quad > -1e-10);
        }
    }
}

TEST_CASE("constant 0-cochains are harmonic on connected complexes") {
    auto ops = dec_for(make_torus_grid(6, 4));
    Cochain ones{0, Vec::Ones(ops.complex->count(0))};
    CHECK(ops.apply_lap(ones).values.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("degree and size validation") {
    auto ops = dec_for(make_triangle());
    Cochain bad{1, Vec::Zero(2)};
    CHECK_THROWS_AS(ops.apply_d(bad), DimensionMismatch);
    Cochain top{2, Vec::Zero(1)};
    CHECK_THROWS_AS(ops.apply_d(top), DegreeMismatch);
    Cochain zero{0, Vec::Zero(3)};
    CHECK_THROWS_AS(ops.apply_delta(zero), DegreeMismatch);
    Cochain a{0, Vec::Ones(3)}, b{1, Vec::Ones(3)};
    CHECK_THROWS_AS(hodge_inner(a, b, ops.stars[0]), DegreeMismatch);
}

TEST_SUITE_END();
