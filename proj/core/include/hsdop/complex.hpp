#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "hsdop/errors.hpp"

namespace hsdop {

using SpMatI = Eigen::SparseMatrix<std::int64_t>;
using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Oriented simplicial complex of dimension <= 3 embedded in R^3.
///
/// Simplices of every degree are stored with ascending vertex indices; that
/// ordering is the reference orientation, and boundary signs follow from the
/// parity of face omission. Boundary matrices are integer-valued so chain
/// identities can be checked in exact arithmetic.
class OrientedSimplicialComplex {
public:
    /// Rows are vertex positions.
    Eigen::Matrix<double, Eigen::Dynamic, 3> coords;

    /// simplices[k] lists the k-simplices, each as k+1 ascending vertex ids.
    /// simplices[0] is implicit (vertex i is {i}) but stored for uniformity.
    std::vector<std::vector<std::array<std::int32_t, 4>>> simplices;

    int dim() const { return static_cast<int>(simplices.size()) - 1; }

    /// Number of k-simplices.
    std::int64_t count(int k) const;

    /// Vertex ids of the i-th k-simplex (k+1 entries).
    std::span<const std::int32_t> simplex(int k, std::int64_t i) const;

    /// Signed boundary matrix B_k: rows (k-1)-simplices, cols k-simplices,
    /// entries in {-1, 0, +1}. Valid for 1 <= k <= dim().
    const SpMatI& boundary(int k) const;

    /// Position of the i-th k-simplex in simplices[k], or -1.
    std::int64_t find_simplex(int k, std::span<const std::int32_t> verts) const;

    std::int64_t euler_characteristic() const;

    /// FNV-1a content hash over dimensions, simplex lists and coordinates.
    std::uint64_t content_hash() const;

    /// Internal: rebuild lookup tables and boundary matrices. Called by the
    /// builders; must be re-run if simplices are edited in place.
    void finalize();

private:
    std::vector<SpMatI> boundaries_;                 // boundaries_[k-1] = B_k
    std::vector<std::vector<std::int64_t>> lookup_;  // sorted order per degree
    mutable std::uint64_t hash_ = 0;
};

using ComplexPtr = std::shared_ptr<const OrientedSimplicialComplex>;

/// Per-simplex measures derived from the embedding.
struct MeshGeometry {
    /// volumes[k][i]: unsigned k-volume (vertex = 1, edge = length,
    /// triangle = area, tet = volume).
    std::vector<Vec> volumes;
    /// barycenters[k]: row i is the barycenter of the i-th k-simplex.
    std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> barycenters;
    Eigen::Vector3d bbox_min;
    Eigen::Vector3d bbox_max;
};

/// Unsigned volumes, barycenters and bounding box for every simplex.
/// Throws DegenerateSimplex if any simplex has volume <= vol_eps.
MeshGeometry compute_geometry(const OrientedSimplicialComplex& c,
                              double vol_eps = 1e-14);

/// Build a 2-complex from triangles, inducing edges. Indices are validated
/// and degenerate faces (repeated vertices) rejected.
OrientedSimplicialComplex build_from_triangle_mesh(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& verts,
    const std::vector<std::array<std::int32_t, 3>>& faces);

/// Build a 3-complex from tetrahedra, inducing faces and edges.
OrientedSimplicialComplex build_from_tet_mesh(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& verts,
    const std::vector<std::array<std::int32_t, 4>>& tets);

/// n-gon boundary: n vertices on the unit circle, n edges. N = (n, n).
OrientedSimplicialComplex make_cycle(int n);

/// Icosahedron subdivided `subdiv` times, vertices projected to the unit
/// sphere. subdiv = 0 gives N = (12, 30, 20).
OrientedSimplicialComplex make_icosphere(int subdiv);

/// Triangulated flat torus on an n x m periodic grid, embedded with major
/// radius 1.0 and minor radius 0.35. N = (nm, 3nm, 2nm).
OrientedSimplicialComplex make_torus_grid(int n, int m);

/// One filled unit triangle. N = (3, 3, 1).
OrientedSimplicialComplex make_triangle();

/// Concatenation with vertex reindexing; the second complex is translated
/// along +x so the embeddings stay disjoint.
OrientedSimplicialComplex disjoint_union(const OrientedSimplicialComplex& a,
                                         const OrientedSimplicialComplex& b);

/// Parse a generator spec such as "cycle(12)", "icosphere(1)",
/// "torus_grid(8,8)", "triangle", or "disjoint_union(triangle,triangle)".
OrientedSimplicialComplex generate(const std::string& spec);

/// Cochain: values indexed by the k-simplices of a fixed complex.
struct Cochain {
    int degree = 0;
    Vec values;
};

inline void check_degree(const OrientedSimplicialComplex& c, const Cochain& w,
                         const char* what) {
    if (w.degree < 0 || w.degree > c.dim())
        throw DegreeMismatch(std::string(what) + ": degree out of range");
    if (w.values.size() != c.count(w.degree))
        throw DimensionMismatch(std::string(what) + ": cochain length " +
                                std::to_string(w.values.size()) + " != N_k " +
                                std::to_string(c.count(w.degree)));
}

} // namespace hsdop
