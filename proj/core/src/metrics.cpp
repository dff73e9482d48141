#include "hsdop/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

namespace hsdop {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(
                    parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    void unite(int a, int b) {
        parent[static_cast<std::size_t>(find(a))] = find(b);
    }
};

/// Undirected adjacency of the scoring graph for degree k: vertices linked
/// by edges when k == 0, otherwise k-simplices sharing a (k-1)-face.
std::vector<std::array<int, 2>> scoring_edges(const DecOperators& dec,
                                              int degree) {
    const auto& c = *dec.complex;
    std::vector<std::array<int, 2>> out;
    if (degree == 0) {
        out.reserve(static_cast<std::size_t>(c.count(1)));
        for (std::int64_t e = 0; e < c.count(1); ++e) {
            auto v = c.simplex(1, e);
            out.push_back({v[0], v[1]});
        }
        return out;
    }
    // Facet -> incident k-simplices via the boundary matrix (facets are
    // rows, k-simplices columns).
    const SpMatI& b = c.boundary(degree);
    std::vector<std::vector<int>> around(
        static_cast<std::size_t>(c.count(degree - 1)));
    for (int col = 0; col < b.outerSize(); ++col)
        for (SpMatI::InnerIterator it(b, col); it; ++it)
            around[static_cast<std::size_t>(it.row())].push_back(col);
    for (const auto& list : around)
        for (std::size_t i = 0; i < list.size(); ++i)
            for (std::size_t j = i + 1; j < list.size(); ++j)
                out.push_back({list[i], list[j]});
    return out;
}

int scoring_degree(const Cochain& w, const DecOperators& dec) {
    if (w.degree == 1 && dec.dim() >= 2) return 2;  // circulation on faces
    return w.degree;
}

int components_above(const Vec& score,
                     const std::vector<std::array<int, 2>>& edges,
                     double threshold) {
    const int n = static_cast<int>(score.size());
    UnionFind uf(n);
    for (const auto& e : edges)
        if (score(e[0]) >= threshold && score(e[1]) >= threshold)
            uf.unite(e[0], e[1]);
    int count = 0;
    for (int i = 0; i < n; ++i)
        if (score(i) >= threshold && uf.find(i) == i) ++count;
    return count;
}

double star_norm(const Vec& w, const Vec& star) {
    return std::sqrt(w.dot(star.cwiseProduct(w)));
}

/// exp(-num/denom), falling back to exp(-num) when the reference scale is
/// exactly zero so a perfect prediction still scores 1.0.
double exp_rel(double num, double denom) {
    return std::exp(-(denom > 0.0 ? num / denom : num));
}

} // namespace

Vec scoring_values(const Cochain& w, const DecOperators& dec) {
    check_degree(*dec.complex, w, "metric scoring");
    if (w.degree == 1 && dec.dim() >= 2)
        return dec.d[1] * w.values;
    return w.values;
}

int superlevel_beta0(const Cochain& w, const DecOperators& dec,
                     double threshold) {
    Vec score = scoring_values(w, dec);
    auto edges = scoring_edges(dec, scoring_degree(w, dec));
    return components_above(score, edges, threshold);
}

MetricsReport metrics(const Cochain& pred, const Cochain& target,
                      const DecOperators& dec, const SpectralSubspace& sub,
                      double alpha) {
    check_degree(*dec.complex, pred, "metrics pred");
    check_degree(*dec.complex, target, "metrics target");
    if (pred.degree != target.degree)
        throw DegreeMismatch("metrics: pred and target degrees differ");
    if (pred.degree != sub.degree)
        throw DegreeMismatch("metrics: subspace degree differs");
    const int k = pred.degree;
    const Vec& star = dec.stars[static_cast<std::size_t>(k)].diag;
    if (star_norm(target.values, star) == 0.0)
        throw ZeroNormTarget("metrics: target has zero Hodge norm");

    MetricsReport r;
    const Vec diff = pred.values - target.values;
    r.mse = diff.squaredNorm() / static_cast<double>(diff.size());

    // Spectral fidelity with 1/sqrt(lambda) weights, harmonic modes skipped.
    Vec cp = sub.coeffs(pred.values);
    Vec cg = sub.coeffs(target.values);
    double num2 = 0.0;
    double den2 = 0.0;
    for (int i = 0; i < sub.truncation(); ++i) {
        if (sub.harmonic_mask(i) != 0.0) continue;
        const double w = 1.0 / std::sqrt(sub.spec.eigenvalues(i));
        num2 += w * w * (cp(i) - cg(i)) * (cp(i) - cg(i));
        den2 += w * w * cg(i) * cg(i);
    }
    r.spec_fid = std::exp(-alpha * (den2 > 0.0
                                        ? std::sqrt(num2) / std::sqrt(den2)
                                        : std::sqrt(num2)));

    // Derivative-based fidelities; at the top degree d is the empty map and
    // every derivative error vanishes.
    if (k < dec.dim()) {
        const Vec& star_up = dec.stars[static_cast<std::size_t>(k) + 1].diag;
        Vec dp = dec.d[static_cast<std::size_t>(k)] * pred.values;
        Vec dg = dec.d[static_cast<std::size_t>(k)] * target.values;
        r.grad_fid = exp_rel(star_norm(dp - dg, star_up),
                             star_norm(dg, star_up));
        const double ep = dp.dot(star_up.cwiseProduct(dp));
        const double eg = dg.dot(star_up.cwiseProduct(dg));
        r.energy_fid = exp_rel(std::abs(ep - eg), eg);
    }
    r.enst_fid = (k == 1) ? r.energy_fid : 1.0;

    // Topology scores on the target's scoring range.
    Vec sp = scoring_values(pred, dec);
    Vec sg = scoring_values(target, dec);
    auto edges = scoring_edges(dec, scoring_degree(pred, dec));
    const double lo = sg.minCoeff();
    const double hi = sg.maxCoeff();
    double acc = 0.0;
    for (int t = 1; t <= 9; ++t) {
        const double thr = lo + 0.1 * t * (hi - lo);
        const int bp = components_above(sp, edges, thr);
        const int bg = components_above(sg, edges, thr);
        acc += std::exp(-std::abs(bp - bg) / std::max(double(bg), 1.0));
    }
    r.beta0_score = acc / 9.0;

    const double thr50 = lo + 0.5 * (hi - lo);
    int inter = 0;
    int uni = 0;
    for (Eigen::Index i = 0; i < sp.size(); ++i) {
        const bool a = sp(i) >= thr50;
        const bool b = sg(i) >= thr50;
        inter += (a && b) ? 1 : 0;
        uni += (a || b) ? 1 : 0;
    }
    r.iou = uni > 0 ? double(inter) / double(uni) : 1.0;
    return r;
}

} // namespace hsdop
