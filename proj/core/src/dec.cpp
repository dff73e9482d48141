#include "hsdop/dec.hpp"

#include <cmath>

namespace hsdop {

namespace {

SpMat to_double(const SpMatI& m) {
    SpMat out(m.rows(), m.cols());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m.nonZeros()));
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMatI::InnerIterator it(m, k); it; ++it)
            trip.emplace_back(static_cast<int>(it.row()),
                              static_cast<int>(it.col()),
                              static_cast<double>(it.value()));
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

SpMat abs_double(const SpMatI& m) {
    SpMat out(m.rows(), m.cols());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m.nonZeros()));
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMatI::InnerIterator it(m, k); it; ++it)
            trip.emplace_back(static_cast<int>(it.row()),
                              static_cast<int>(it.col()),
                              std::abs(static_cast<double>(it.value())));
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

} // namespace

std::vector<HodgeStar> build_hodge_stars(const OrientedSimplicialComplex& c,
                                         const MeshGeometry& g, StarMode mode) {
    const int n = c.dim();
    std::vector<HodgeStar> stars(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
        stars[static_cast<std::size_t>(k)].degree = k;
        stars[static_cast<std::size_t>(k)].diag = Vec::Ones(c.count(k));
    }
    if (mode == StarMode::identity) return stars;

    // Dual volume shares, distributed from the top dimension downward.
    std::vector<Vec> share(static_cast<std::size_t>(n) + 1);
    share[static_cast<std::size_t>(n)] = g.volumes[static_cast<std::size_t>(n)];
    for (int k = n - 1; k >= 0; --k)
        share[static_cast<std::size_t>(k)] =
            abs_double(c.boundary(k + 1)) * share[static_cast<std::size_t>(k + 1)] /
            static_cast<double>(k + 2);

    for (int k = 0; k <= n; ++k) {
        Vec s = share[static_cast<std::size_t>(k)].cwiseQuotient(
            g.volumes[static_cast<std::size_t>(k)].cwiseAbs2());
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (!(s(i) > 0.0))
                throw DegenerateSimplex(
                    "hodge star: " + std::to_string(k) + "-simplex " +
                    std::to_string(i) +
                    " has no top-dimensional coface (nonpositive dual share)");
        stars[static_cast<std::size_t>(k)].diag = std::move(s);
    }
    return stars;
}

Cochain DecOperators::apply_d(const Cochain& w) const {
    check_degree(*complex, w, "apply_d");
    if (w.degree >= dim())
        throw DegreeMismatch("apply_d: no d at top degree");
    return Cochain{w.degree + 1, d[static_cast<std::size_t>(w.degree)] * w.values};
}

Cochain DecOperators::apply_delta(const Cochain& w) const {
    check_degree(*complex, w, "apply_delta");
    if (w.degree < 1) throw DegreeMismatch("apply_delta: no delta at degree 0");
    return Cochain{w.degree - 1,
                   delta[static_cast<std::size_t>(w.degree)] * w.values};
}

Cochain DecOperators::apply_lap(const Cochain& w) const {
    check_degree(*complex, w, "apply_lap");
    return Cochain{w.degree, lap[static_cast<std::size_t>(w.degree)] * w.values};
}

DecOperators assemble_dec(ComplexPtr complex, std::vector<HodgeStar> stars) {
    if (!complex) throw InvalidParameter("assemble_dec: null complex");
    const int n = complex->dim();
    if (stars.size() != static_cast<std::size_t>(n) + 1)
        throw DimensionMismatch("assemble_dec: need one star per degree");
    for (int k = 0; k <= n; ++k)
        if (stars[static_cast<std::size_t>(k)].diag.size() != complex->count(k))
            throw DimensionMismatch("assemble_dec: star size mismatch at degree " +
                                    std::to_string(k));

    DecOperators ops;
    ops.complex = std::move(complex);
    ops.stars = std::move(stars);
    ops.d.resize(static_cast<std::size_t>(n) + 1);
    ops.delta.resize(static_cast<std::size_t>(n) + 1);
    ops.lap.resize(static_cast<std::size_t>(n) + 1);

    for (int k = 0; k < n; ++k) {
        SpMat B = to_double(ops.complex->boundary(k + 1));
        ops.d[static_cast<std::size_t>(k)] = SpMat(B.transpose());
    }
    ops.d[static_cast<std::size_t>(n)] =
        SpMat(0, static_cast<int>(ops.complex->count(n)));

    ops.delta[0] = SpMat(0, static_cast<int>(ops.complex->count(0)));
    for (int k = 1; k <= n; ++k) {
        SpMat B = to_double(ops.complex->boundary(k));
        Vec inv_prev = ops.star(k - 1).cwiseInverse();
        ops.delta[static_cast<std::size_t>(k)] =
            inv_prev.asDiagonal() * B * ops.star(k).asDiagonal();
    }

    for (int k = 0; k <= n; ++k) {
        SpMat L(static_cast<int>(ops.complex->count(k)),
                static_cast<int>(ops.complex->count(k)));
        if (k > 0)
            L = ops.d[static_cast<std::size_t>(k - 1)] *
                ops.delta[static_cast<std::size_t>(k)];
        if (k < n) {
            SpMat up = ops.delta[static_cast<std::size_t>(k + 1)] *
                       ops.d[static_cast<std::size_t>(k)];
            L = (k > 0) ? SpMat(L + up) : up;
        }
        L.makeCompressed();
        ops.lap[static_cast<std::size_t>(k)] = std::move(L);
    }
    return ops;
}

DecOperators assemble_dec(ComplexPtr complex, StarMode mode) {
    if (!complex) throw InvalidParameter("assemble_dec: null complex");
    auto geom = compute_geometry(*complex);
    auto stars = build_hodge_stars(*complex, geom, mode);
    return assemble_dec(std::move(complex), std::move(stars));
}

double hodge_inner(const Cochain& a, const Cochain& b, const HodgeStar& star) {
    if (a.degree != b.degree || a.degree != star.degree)
        throw DegreeMismatch("hodge_inner: degree mismatch");
    if (a.values.size() != b.values.size() ||
        a.values.size() != star.diag.size())
        throw DimensionMismatch("hodge_inner: size mismatch");
    return a.values.dot(star.diag.cwiseProduct(b.values));
}

double hodge_norm(const Cochain& a, const HodgeStar& star) {
    return std::sqrt(hodge_inner(a, a, star));
}

} // namespace hsdop
