#include "hsdop/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

namespace hsdop {

namespace {

/// Symmetrized operator S = D^{1/2} L D^{-1/2} as a sparse matrix.
SpMat symmetrized(const DecOperators& ops, int k) {
    Vec shalf = ops.star(k).cwiseSqrt();
    Vec sinv = shalf.cwiseInverse();
    SpMat S = shalf.asDiagonal() * ops.lap[static_cast<std::size_t>(k)] *
              sinv.asDiagonal();
    // Exact symmetry for the eigensolvers.
    SpMat St = SpMat(S.transpose());
    return SpMat(0.5 * (S + St));
}

/// Modified Gram-Schmidt in the Euclidean inner product, in place.
void orthonormalize(Mat& V) {
    for (Eigen::Index j = 0; j < V.cols(); ++j) {
        for (int sweep = 0; sweep < 2; ++sweep)
            for (Eigen::Index i = 0; i < j; ++i)
                V.col(j) -= V.col(i).dot(V.col(j)) * V.col(i);
        double n = V.col(j).norm();
        if (n < 1e-300) throw ConvergenceFailure("orthonormalize: rank collapse");
        V.col(j) /= n;
    }
}

struct SymPairs {
    Vec values;  // ascending
    Mat vectors; // orthonormal columns (Euclidean)
};

/// Lanczos with full reorthogonalization on A = (S - sigma I)^{-1}.
/// Returns the m largest eigenpairs of A, i.e. the smallest of S.
SymPairs shift_invert_smallest(const SpMat& S, int m, double sigma,
                               int max_iter) {
    const auto n = static_cast<Eigen::Index>(S.rows());
    SpMat shifted = S;
    for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= sigma;
    shifted.makeCompressed();
    Eigen::SimplicialLDLT<SpMat> fact(shifted);
    if (fact.info() != Eigen::Success)
        throw ConvergenceFailure("shift-invert factorization failed");

    const int maxit = std::min<int>(max_iter, static_cast<int>(n));
    std::mt19937_64 rng(0x5eedULL + static_cast<std::uint64_t>(n));
    auto random_unit = [&](auto orth_against_cols) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v(i) = static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
        orth_against_cols(v);
        double nn = v.norm();
        if (nn < 1e-300) throw ConvergenceFailure("Lanczos: degenerate restart");
        return Vec(v / nn);
    };

    Mat V(n, maxit);
    std::vector<double> alpha, beta;  // beta[j] couples v_j and v_{j+1}
    V.col(0) = random_unit([](Vec&) {});
    int j = 0;
    const double tol = 1e-10;

    while (true) {
        Vec w = fact.solve(V.col(j));
        double a = V.col(j).dot(w);
        alpha.push_back(a);
        w -= a * V.col(j);
        if (j > 0) w -= beta[static_cast<std::size_t>(j - 1)] * V.col(j - 1);
        // Full reorthogonalization, two passes.
        for (int sweep = 0; sweep < 2; ++sweep)
            w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
        double b = w.norm();

        const int jd = j + 1;  // current Krylov dimension
        bool last_possible = (jd == maxit);

        // Ritz pairs of the tridiagonal T_jd.
        Mat T = Mat::Zero(jd, jd);
        for (int i = 0; i < jd; ++i) T(i, i) = alpha[static_cast<std::size_t>(i)];
        for (int i = 0; i + 1 < jd; ++i)
            T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
        Eigen::SelfAdjointEigenSolver<Mat> teig(T);
        // Largest eigenvalues of A sit at the top end.
        bool converged = false;
        if (jd >= m) {
            converged = true;
            for (int t = 0; t < m; ++t) {
                int col = jd - 1 - t;
                double resid = std::abs(b * teig.eigenvectors()(jd - 1, col));
                if (resid > tol * std::max(std::abs(teig.eigenvalues()(col)), 1e-30)) {
                    converged = false;
                    break;
                }
            }
        }
        if (converged || last_possible) {
            if (!converged && jd < static_cast<int>(n))
                throw ConvergenceFailure(
                    "shift-invert Lanczos: not converged after " +
                    std::to_string(jd) + " iterations");
            SymPairs out;
            out.values.resize(m);
            out.vectors.resize(n, m);
            // Reverse so eigenvalues of S come out ascending.
            for (int t = 0; t < m; ++t) {
                int col = jd - 1 - t;
                out.values(t) = teig.eigenvalues()(col);
                out.vectors.col(t) = V.leftCols(jd) * teig.eigenvectors().col(col);
            }
            orthonormalize(out.vectors);
            return out;
        }

        if (b < 1e-12) {
            // Invariant subspace found; continue in its orthogonal complement.
            V.col(j + 1) = random_unit([&](Vec& v) {
                for (int sweep = 0; sweep < 2; ++sweep)
                    v -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * v);
            });
            beta.push_back(0.0);
        } else {
            V.col(j + 1) = w / b;
            beta.push_back(b);
        }
        ++j;
    }
}

} // namespace

HodgeSpectrum eigensolve(const DecOperators& ops, int degree, int m,
                         EigenMethod method, double tau_zero) {
    if (degree < 0 || degree > ops.dim())
        throw DegreeMismatch("eigensolve: degree out of range");
    const auto n = ops.complex->count(degree);
    if (m < 1 || m > n)
        throw InvalidTruncation("eigensolve: truncation " + std::to_string(m) +
                                " outside [1, " + std::to_string(n) + "]");

    SpMat S = symmetrized(ops, degree);
    EigenMethod chosen = method;
    if (chosen == EigenMethod::automatic)
        chosen = (n <= 4000) ? EigenMethod::dense : EigenMethod::shift_invert;

    SymPairs pairs;
    double lambda_max_seen;
    if (chosen == EigenMethod::dense) {
        Mat Sd = Mat(S);
        Eigen::SelfAdjointEigenSolver<Mat> eig(Sd);
        if (eig.info() != Eigen::Success)
            throw ConvergenceFailure("dense symmetric eigensolve failed");
        pairs.values = eig.eigenvalues().head(m);
        pairs.vectors = eig.eigenvectors().leftCols(m);
        lambda_max_seen = eig.eigenvalues()(n - 1);
    } else {
        const double sigma = -1e-6;
        pairs = shift_invert_smallest(S, m, sigma, 50 * m);
        // Convert eigenvalues of (S - sigma I)^{-1} back to eigenvalues of S.
        for (Eigen::Index i = 0; i < pairs.values.size(); ++i)
            pairs.values(i) = sigma + 1.0 / pairs.values(i);
        std::vector<int> order(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return pairs.values(a) < pairs.values(b);
        });
        Vec vs(m);
        Mat vecs(n, m);
        for (int i = 0; i < m; ++i) {
            vs(i) = pairs.values(order[static_cast<std::size_t>(i)]);
            vecs.col(i) = pairs.vectors.col(order[static_cast<std::size_t>(i)]);
        }
        pairs.values = std::move(vs);
        pairs.vectors = std::move(vecs);
        lambda_max_seen = pairs.values(m - 1);
    }

    // Roundoff can push exact zeros slightly negative.
    const double floor_tol = 1e-10 * std::max(lambda_max_seen, 1.0);
    for (Eigen::Index i = 0; i < pairs.values.size(); ++i) {
        if (pairs.values(i) < -floor_tol)
            throw ConvergenceFailure("eigensolve: negative eigenvalue " +
                                     std::to_string(pairs.values(i)));
        if (pairs.values(i) < 0) pairs.values(i) = 0.0;
    }

    HodgeSpectrum out;
    out.degree = degree;
    out.eigenvalues = pairs.values;
    out.zero_threshold = tau_zero * std::max(lambda_max_seen, 1.0);
    for (int i = 0; i < m; ++i)
        if (out.eigenvalues(i) < out.zero_threshold)
            out.harmonic_indices.push_back(i);

    // Back-transform to star-orthonormal eigenvectors of L.
    Vec sinv_half = ops.star(degree).cwiseSqrt().cwiseInverse();
    out.basis = sinv_half.asDiagonal() * pairs.vectors;
    return out;
}

BettiDiagnostic validate_betti(const std::vector<HodgeSpectrum>& spectra,
                               const std::vector<int>& expected) {
    BettiDiagnostic diag;
    diag.expected = expected;
    for (const auto& s : spectra) diag.detected.push_back(s.betti());
    for (std::size_t k = 0; k < spectra.size() && k < expected.size(); ++k) {
        if (expected[k] < 0) continue;
        if (spectra[k].betti() != expected[k]) {
            diag.match = false;
            diag.message += "degree " + std::to_string(k) + ": detected b=" +
                            std::to_string(spectra[k].betti()) + ", expected " +
                            std::to_string(expected[k]) + "; ";
        }
    }
    if (diag.match) diag.message = "harmonic counts match expectations";
    return diag;
}

Vec SpectralSubspace::coeffs(const Vec& w) const {
    if (w.size() != spec.basis.rows())
        throw DimensionMismatch("coeffs: cochain length mismatch");
    return spec.basis.transpose() * star.cwiseProduct(w);
}

Vec SpectralSubspace::reconstruct(const Vec& c) const {
    if (c.size() != spec.basis.cols())
        throw DimensionMismatch("reconstruct: coefficient length mismatch");
    return spec.basis * c;
}

Vec SpectralSubspace::project_base(const Vec& w) const {
    return reconstruct(coeffs(w));
}

Vec SpectralSubspace::project_fiber(const Vec& w) const {
    return w - project_base(w);
}

SpectralSubspace build_subspace(const DecOperators& ops, HodgeSpectrum spec_k,
                                const HodgeSpectrum* spec_up,
                                const HodgeSpectrum* spec_down) {
    const int k = spec_k.degree;
    SpectralSubspace sub;
    sub.degree = k;
    sub.star = ops.star(k);
    sub.harmonic_mask = Vec::Zero(spec_k.truncation());
    for (int i : spec_k.harmonic_indices) sub.harmonic_mask(i) = 1.0;

    if (spec_up) {
        if (spec_up->degree != k + 1)
            throw DegreeMismatch("build_subspace: spec_up must be degree k+1");
        sub.M_d = spec_up->basis.transpose() * ops.star(k + 1).asDiagonal() *
                  (ops.d[static_cast<std::size_t>(k)] * spec_k.basis);
    } else {
        sub.M_d = Mat::Zero(0, spec_k.truncation());
    }
    if (spec_down) {
        if (spec_down->degree != k - 1)
            throw DegreeMismatch("build_subspace: spec_down must be degree k-1");
        sub.M_delta = spec_down->basis.transpose() *
                      ops.star(k - 1).asDiagonal() *
                      (ops.delta[static_cast<std::size_t>(k)] * spec_k.basis);
    } else {
        sub.M_delta = Mat::Zero(0, spec_k.truncation());
    }
    sub.spec = std::move(spec_k);
    return sub;
}

HodgeDecomposition hodge_decompose(const DecOperators& ops, const Cochain& w) {
    check_degree(*ops.complex, w, "hodge_decompose");
    const int k = w.degree;
    const auto nk = ops.complex->count(k);
    Vec shalf = ops.star(k).cwiseSqrt();
    Vec b = shalf.cwiseProduct(w.values);

    auto weighted_lsq = [&](const SpMat& op) {
        // min over x of || D^{1/2} (op x - w) ||_2. The operators here are
        // rank-deficient and can be wide, so use a complete orthogonal
        // decomposition, which minimizes the residual for every shape.
        Mat A = shalf.asDiagonal() * Mat(op);
        Vec x = A.completeOrthogonalDecomposition().solve(b);
        return Vec(op * x);
    };

    HodgeDecomposition out;
    out.exact = Cochain{k, Vec::Zero(nk)};
    out.coexact = Cochain{k, Vec::Zero(nk)};
    if (k > 0)
        out.exact.values = weighted_lsq(ops.d[static_cast<std::size_t>(k - 1)]);
    if (k < ops.dim())
        out.coexact.values =
            weighted_lsq(ops.delta[static_cast<std::size_t>(k + 1)]);
    out.harmonic = Cochain{k, w.values - out.exact.values - out.coexact.values};
    return out;
}

} // namespace hsdop
