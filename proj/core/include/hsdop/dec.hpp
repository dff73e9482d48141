#pragma once

#include <vector>

#include "hsdop/complex.hpp"

namespace hsdop {

/// Diagonal Hodge star for one degree.
struct HodgeStar {
    int degree = 0;
    Vec diag;
};

enum class StarMode {
    /// Lumped barycentric duals: every top simplex distributes its volume
    /// equally among its k-faces; the star entry is that dual share divided
    /// by the squared primal volume. Normative for all numerics.
    barycentric,
    /// All-ones stars, for unit tests that want pure combinatorics.
    identity,
};

/// Stars for all degrees 0..dim. Requires every simplex to have at least one
/// top-dimensional coface (true for complexes induced from cell meshes), so
/// entries are strictly positive.
std::vector<HodgeStar> build_hodge_stars(const OrientedSimplicialComplex& c,
                                         const MeshGeometry& g, StarMode mode);

/// Assembled discrete exterior calculus operators on one complex.
///
/// d[k]     : C^k -> C^{k+1} is the transpose of the boundary matrix B_{k+1};
/// delta[k] : C^k -> C^{k-1} is star_{k-1}^{-1} B_k star_k, the adjoint of
///            d_{k-1} under the Hodge inner products;
/// lap[k]   = d_{k-1} delta_k + delta_{k+1} d_k.
struct DecOperators {
    ComplexPtr complex;
    std::vector<HodgeStar> stars;
    std::vector<SpMat> d;      // d[k] valid for 0 <= k < dim; d[dim] is 0 x N
    std::vector<SpMat> delta;  // delta[k] valid for 1 <= k <= dim; delta[0] is 0 x N
    std::vector<SpMat> lap;    // lap[k] valid for 0 <= k <= dim

    int dim() const { return complex->dim(); }
    const Vec& star(int k) const { return stars.at(static_cast<std::size_t>(k)).diag; }

    Cochain apply_d(const Cochain& w) const;
    Cochain apply_delta(const Cochain& w) const;
    Cochain apply_lap(const Cochain& w) const;
};

DecOperators assemble_dec(ComplexPtr complex, std::vector<HodgeStar> stars);

/// Convenience: stars from geometry, then assemble.
DecOperators assemble_dec(ComplexPtr complex,
                          StarMode mode = StarMode::barycentric);

/// <a, b>_{*k} = a^T diag(star) b. Degrees and sizes must match.
double hodge_inner(const Cochain& a, const Cochain& b, const HodgeStar& star);
double hodge_norm(const Cochain& a, const HodgeStar& star);

} // namespace hsdop
