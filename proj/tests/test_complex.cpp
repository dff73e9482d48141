#include <doctest.h>

#include <cmath>

#include "hsdop/complex.hpp"
#include "test_util.hpp"

using namespace hsdop;

namespace {

/// Largest absolute entry of an integer sparse product, for exactness checks.
std::int64_t max_abs(const SpMatI& m) {
    std::int64_t best = 0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMatI::InnerIterator it(m, k); it; ++it)
            best = std::max(best, std::abs(it.value()));
    return best;
}

} // namespace

TEST_SUITE_BEGIN("complex");

TEST_CASE("single triangle has counts (3, 3, 1)") {
    auto c = make_triangle();
    CHECK(c.dim() == 2);
    CHECK(c.count(0) == 3);
    CHECK(c.count(1) == 3);
    CHECK(c.count(2) == 1);
    CHECK(c.euler_characteristic() == 1);
}

TEST_CASE("single tet has counts (4, 6, 4, 1)") {
    Eigen::Matrix<double, Eigen::Dynamic, 3> verts(4, 3);
    verts << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
    auto c = build_from_tet_mesh(verts, {{0, 1, 2, 3}});
    CHECK(c.count(0) == 4);
    CHECK(c.count(1) == 6);
    CHECK(c.count(2) == 4);
    CHECK(c.count(3) == 1);
    CHECK(c.euler_characteristic() == 1);
}

TEST_CASE("two tets sharing a face have counts (5, 9, 7, 2)") {
    Eigen::Matrix<double, Eigen::Dynamic, 3> verts(5, 3);
    verts << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 1;
    auto c = build_from_tet_mesh(verts, {{0, 1, 2, 3}, {1, 2, 3, 4}});
    CHECK(c.count(0) == 5);
    CHECK(c.count(1) == 9);
    CHECK(c.count(2) == 7);
    CHECK(c.count(3) == 2);
}

TEST_CASE("boundary composition vanishes in integer arithmetic") {
    auto check_exact = [](const OrientedSimplicialComplex& c) {
        for (int k = 1; k < c.dim(); ++k) {
            SpMatI prod = c.boundary(k) * c.boundary(k + 1);
            CHECK(max_abs(prod) == 0);
        }
    };
    check_exact(make_torus_grid(4, 5));
    check_exact(make_icosphere(1));
    check_exact(testutil::cube_tet_mesh(2, 2, 2, 0.15));
    check_exact(make_triangle());
}

TEST_CASE("cycle generator") {
    auto c = make_cycle(12);
    CHECK(c.dim() == 1);
    CHECK(c.count(0) == 12);
    CHECK(c.count(1) == 12);
    CHECK(c.euler_characteristic() == 0);
    // Every vertex meets exactly two edges.
    const auto& B = c.boundary(1);
    Eigen::VectorXd deg = Eigen::VectorXd::Zero(12);
    for (int k = 0; k < B.outerSize(); ++k)
        for (SpMatI::InnerIterator it(B, k); it; ++it)
            deg(it.row()) += 1;
    CHECK(deg.minCoeff() == 2);
    CHECK(deg.maxCoeff() == 2);
    CHECK_THROWS_AS(make_cycle(2), InvalidParameter);
}

TEST_CASE("icosphere counts and Euler characteristic") {
    auto ico = make_icosphere(0);
    CHECK(ico.count(0) == 12);
    CHECK(ico.count(1) == 30);
    CHECK(ico.count(2) == 20);
    CHECK(ico.euler_characteristic() == 2);

    auto s1 = make_icosphere(1);
    CHECK(s1.count(0) == 42);
    CHECK(s1.count(1) == 120);
    CHECK(s1.count(2) == 80);
    CHECK(s1.euler_characteristic() == 2);

    // All vertices on the unit sphere.
    for (Eigen::Index i = 0; i < s1.coords.rows(); ++i)
        CHECK(testutil::rel_err(s1.coords.row(i).norm(), 1.0) < 1e-12);
}

TEST_CASE("torus grid counts, Euler characteristic and embedding radii") {
    auto t = make_torus_grid(8, 8);
    CHECK(t.count(0) == 64);
    CHECK(t.count(1) == 3 * 64);
    CHECK(t.count(2) == 2 * 64);
    CHECK(t.euler_characteristic() == 0);

    for (Eigen::Index i = 0; i < t.coords.rows(); ++i) {
        double rho = std::hypot(t.coords(i, 0), t.coords(i, 1));
        double dist = std::hypot(rho - 1.0, t.coords(i, 2));
        CHECK(testutil::rel_err(dist, 0.35) < 1e-12);
    }
    CHECK_THROWS_AS(make_torus_grid(2, 8), InvalidParameter);
}

TEST_CASE("disjoint union reindexes and keeps embeddings apart") {
    auto two = disjoint_union(make_triangle(), make_triangle());
    CHECK(two.count(0) == 6);
    CHECK(two.count(1) == 6);
    CHECK(two.count(2) == 2);
    auto g = compute_geometry(two);
    // Second copy was translated along +x.
    CHECK(two.coords.block(3, 0, 3, 1).minCoeff() >
          two.coords.block(0, 0, 3, 1).maxCoeff());
    CHECK(g.volumes[2].size() == 2);
}

TEST_CASE("builders validate indices and degeneracy") {
    Eigen::Matrix<double, Eigen::Dynamic, 3> verts(3, 3);
    verts << 0, 0, 0, 1, 0, 0, 0, 1, 0;
    CHECK_THROWS_AS(build_from_triangle_mesh(verts, {{0, 1, 3}}),
                    IndexOutOfRange);
    CHECK_THROWS_AS(build_from_triangle_mesh(verts, {{0, 1, 1}}),
                    DegenerateSimplex);
}

TEST_CASE("geometry volumes") {
    SUBCASE("unit right triangle area") {
        auto c = make_triangle();
        auto g = compute_geometry(c);
        CHECK(testutil::rel_err(g.volumes[2](0), 0.5) < 1e-15);
        CHECK(g.volumes[0].isOnes());
        // Legs have length 1, hypotenuse sqrt(2).
        CHECK(testutil::rel_err(g.volumes[1].maxCoeff(), std::sqrt(2.0)) < 1e-15);
        CHECK(testutil::rel_err(g.volumes[1].minCoeff(), 1.0) < 1e-15);
    }
    SUBCASE("regular tet with unit edges has volume sqrt(2)/12") {
        // Vertices of a regular tetrahedron inscribed so all edges are 1.
        Eigen::Matrix<double, Eigen::Dynamic, 3> verts(4, 3);
        const double s = 1.0 / std::sqrt(2.0);
        verts << 1, 0, -s, -1, 0, -s, 0, 1, s, 0, -1, s;
        verts *= 0.5; // edges above have length 2
        auto c = build_from_tet_mesh(verts, {{0, 1, 2, 3}});
        auto g = compute_geometry(c);
        for (Eigen::Index e = 0; e < g.volumes[1].size(); ++e)
            CHECK(testutil::rel_err(g.volumes[1](e), 1.0) < 1e-12);
        CHECK(testutil::rel_err(g.volumes[3](0), std::sqrt(2.0) / 12.0) < 1e-12);
    }
    SUBCASE("collinear triangle is rejected") {
        Eigen::Matrix<double, Eigen::Dynamic, 3> verts(3, 3);
        verts << 0, 0, 0, 1, 0, 0, 2, 0, 0;
        auto c = build_from_triangle_mesh(verts, {{0, 1, 2}});
        CHECK_THROWS_AS(compute_geometry(c), DegenerateSimplex);
    }
    SUBCASE("bounding box") {
        auto t = make_torus_grid(8, 8);
        auto g = compute_geometry(t);
        CHECK(g.bbox_max(0) <= 1.35 + 1e-12);
        CHECK(g.bbox_min(2) >= -0.35 - 1e-12);
    }
}

TEST_CASE("content hash is order-invariant and geometry-sensitive") {
    Eigen::Matrix<double, Eigen::Dynamic, 3> verts(4, 3);
    verts << 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0;
    auto a = build_from_triangle_mesh(verts, {{0, 1, 2}, {1, 3, 2}});
    auto b = build_from_triangle_mesh(verts, {{1, 3, 2}, {0, 1, 2}});
    CHECK(a.content_hash() == b.content_hash());

    verts(3, 0) = 1.25;
    auto c = build_from_triangle_mesh(verts, {{0, 1, 2}, {1, 3, 2}});
    CHECK(a.content_hash() != c.content_hash());
}

TEST_CASE("generator spec parser") {
    CHECK(generate("cycle(12)").count(0) == 12);
    CHECK(generate("torus_grid(4, 6)").count(2) == 48);
    CHECK(generate("icosphere(0)").count(2) == 20);
    CHECK(generate("disjoint_union(triangle, triangle)").count(2) == 2);
    CHECK(generate("disjoint_union(torus_grid(3,3), cycle(5))").count(0) == 14);
    CHECK_THROWS_AS(generate("klein_bottle(3)"), ParseError);
    CHECK_THROWS_AS(generate("cycle(12) junk"), ParseError);
    CHECK_THROWS_AS(generate("cycle(12,13)"), ParseError);
}

TEST_CASE("find_simplex locates edges and rejects absent ones") {
    auto t = make_torus_grid(4, 4);
    auto e0 = t.simplex(1, 5);
    std::array<std::int32_t, 2> probe{e0[0], e0[1]};
    CHECK(t.find_simplex(1, probe) == 5);
    std::array<std::int32_t, 2> absent{0, 9};
    // Vertices 0 and 9 are two grid rows apart, never joined by an edge.
    CHECK(t.find_simplex(1, absent) == -1);
}

TEST_SUITE_END();
