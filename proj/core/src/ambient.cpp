#include "hsdop/ambient.hpp"

#include <cmath>
#include <cstring>

#include <fftw3.h>

namespace hsdop {

AmbientGrid make_grid(const MeshGeometry& geom, Eigen::Vector3i res,
                      double margin) {
    if ((res.array() < 2).any())
        throw InvalidParameter("make_grid: resolution must be >= 2 per axis");
    AmbientGrid g;
    g.res = res;
    Eigen::Vector3d extent = geom.bbox_max - geom.bbox_min;
    double diag = extent.norm();
    for (int a = 0; a < 3; ++a) {
        double pad = margin * (extent(a) > 1e-12 * std::max(diag, 1.0)
                                   ? extent(a)
                                   : std::max(diag, 1.0));
        g.lo(a) = geom.bbox_min(a) - pad;
        g.hi(a) = geom.bbox_max(a) + pad;
    }
    g.spacing = (g.hi - g.lo).cwiseQuotient(res.cast<double>());
    g.voxel_volume = g.spacing.prod();
    return g;
}

namespace {

int lift_channels(int degree) {
    switch (degree) {
        case 0: return 1;
        case 1: return 3;
        case 2: return 3;
        default: return 1;
    }
}

/// Unit direction weights for one simplex: edge tangent, face normal, or 1.
Eigen::Vector3d direction_weight(const OrientedSimplicialComplex& c,
                                 int degree, std::int64_t i) {
    if (degree == 1) {
        auto s = c.simplex(1, i);
        Eigen::Vector3d e =
            (c.coords.row(s[1]) - c.coords.row(s[0])).transpose();
        return e.normalized();
    }
    if (degree == 2) {
        auto s = c.simplex(2, i);
        Eigen::Vector3d e1 =
            (c.coords.row(s[1]) - c.coords.row(s[0])).transpose();
        Eigen::Vector3d e2 =
            (c.coords.row(s[2]) - c.coords.row(s[0])).transpose();
        return e1.cross(e2).normalized();
    }
    return Eigen::Vector3d::UnitX();  // only component 0 is used
}

} // namespace

LiftOperator build_lift(const AmbientGrid& grid,
                        const OrientedSimplicialComplex& c,
                        const MeshGeometry& geom, int degree,
                        const HodgeStar& star, LiftKernel kernel, double eps) {
    if (degree < 0 || degree > c.dim())
        throw DegreeMismatch("build_lift: degree out of range");
    if (star.degree != degree)
        throw DegreeMismatch("build_lift: star degree mismatch");
    if (kernel == LiftKernel::gaussian) {
        double min_extent = (grid.hi - grid.lo).minCoeff();
        if (!(eps > 0.0))
            throw InvalidParameter("build_lift: gaussian needs eps > 0");
        if (eps >= 0.25 * min_extent)
            throw BandwidthTooLarge(
                "build_lift: gaussian bandwidth " + std::to_string(eps) +
                " >= min grid extent / 4 = " + std::to_string(0.25 * min_extent));
    }

    LiftOperator op;
    op.degree = degree;
    op.channels = lift_channels(degree);
    op.grid = grid;

    const auto V = grid.num_voxels();
    const auto nk = c.count(degree);
    const auto& bary = geom.barycenters[static_cast<std::size_t>(degree)];
    op.occupancy = Vec::Zero(V);

    std::vector<Eigen::Triplet<double>> trip;
    std::vector<Eigen::Triplet<double>> sample_trip;
    std::vector<std::pair<Eigen::Index, double>> weights;
    for (std::int64_t s = 0; s < nk; ++s) {
        Eigen::Vector3d p = bary.row(s).transpose();
        weights.clear();

        if (kernel == LiftKernel::trilinear_hat) {
            // Cell-centered trilinear weights over the 8 surrounding voxels.
            Eigen::Vector3d t =
                (p - grid.lo).cwiseQuotient(grid.spacing).array() - 0.5;
            Eigen::Vector3i i0 = t.array().floor().cast<int>();
            Eigen::Vector3d frac = t - i0.cast<double>();
            for (int dx = 0; dx <= 1; ++dx)
                for (int dy = 0; dy <= 1; ++dy)
                    for (int dz = 0; dz <= 1; ++dz) {
                        Eigen::Vector3i q = i0 + Eigen::Vector3i(dx, dy, dz);
                        if ((q.array() < 0).any() ||
                            (q.array() >= grid.res.array()).any())
                            continue;
                        double w = (dx ? frac.x() : 1 - frac.x()) *
                                   (dy ? frac.y() : 1 - frac.y()) *
                                   (dz ? frac.z() : 1 - frac.z());
                        if (w <= 0) continue;
                        Eigen::Index id =
                            (static_cast<Eigen::Index>(q.x()) * grid.res.y() +
                             q.y()) * grid.res.z() + q.z();
                        weights.emplace_back(id, w);
                    }
        } else {
            const double radius = 3.0 * eps;
            Eigen::Vector3i qlo, qhi;
            for (int a = 0; a < 3; ++a) {
                qlo(a) = std::max(
                    0, static_cast<int>(std::floor(
                           (p(a) - radius - grid.lo(a)) / grid.spacing(a) - 0.5)));
                qhi(a) = std::min(
                    grid.res(a) - 1,
                    static_cast<int>(std::ceil(
                        (p(a) + radius - grid.lo(a)) / grid.spacing(a) - 0.5)));
            }
            for (int i = qlo.x(); i <= qhi.x(); ++i)
                for (int j = qlo.y(); j <= qhi.y(); ++j)
                    for (int k = qlo.z(); k <= qhi.z(); ++k) {
                        double d2 = (grid.center(i, j, k) - p).squaredNorm();
                        if (d2 > radius * radius) continue;
                        double w = std::exp(-d2 / (2.0 * eps * eps));
                        Eigen::Index id =
                            (static_cast<Eigen::Index>(i) * grid.res.y() + j) *
                                grid.res.z() + k;
                        weights.emplace_back(id, w);
                    }
        }

        double mass = 0.0;
        for (auto& [id, w] : weights) mass += w;
        if (mass <= 0.0)
            throw InvalidParameter(
                "build_lift: simplex barycenter has no kernel support "
                "(grid too coarse or point outside the grid)");

        Eigen::Vector3d dir = direction_weight(c, degree, s);
        for (auto& [id, w] : weights) {
            double wn = w / mass;
            op.occupancy(id) += wn;
            sample_trip.emplace_back(static_cast<Eigen::Index>(s), id, wn);
            for (int ch = 0; ch < op.channels; ++ch) {
                double val = wn * (op.channels == 1 ? 1.0 : dir(ch));
                if (val != 0.0)
                    trip.emplace_back(static_cast<Eigen::Index>(ch) * V + id,
                                      static_cast<Eigen::Index>(s), val);
            }
        }
    }

    op.splat.resize(static_cast<Eigen::Index>(op.channels) * V,
                    static_cast<Eigen::Index>(nk));
    op.splat.setFromTriplets(trip.begin(), trip.end());
    op.splat.makeCompressed();

    op.sample.resize(static_cast<Eigen::Index>(nk), V);
    op.sample.setFromTriplets(sample_trip.begin(), sample_trip.end());
    op.sample.makeCompressed();

    double occ_max = op.occupancy.maxCoeff();
    if (occ_max > 0) op.occupancy /= occ_max;

    Vec star_inv = star.diag.cwiseInverse();
    SpMat splat_t = op.splat.transpose();
    op.pullback_mat = star_inv.asDiagonal() * splat_t;
    op.pullback_mat *= grid.voxel_volume;
    return op;
}

Mat LiftOperator::lift(const Vec& values) const {
    if (values.size() != splat.cols())
        throw DimensionMismatch("lift: cochain length mismatch");
    Vec flat = splat * values;
    return Eigen::Map<const Mat>(flat.data(), grid.num_voxels(), channels);
}

Vec LiftOperator::pullback(const Mat& field) const {
    if (field.rows() != grid.num_voxels() || field.cols() != channels)
        throw DimensionMismatch("pullback: field shape mismatch");
    Eigen::Map<const Vec> flat(field.data(),
                               static_cast<Eigen::Index>(channels) *
                                   grid.num_voxels());
    return pullback_mat * flat;
}

ResolutionReport validate_resolution(const AmbientGrid& grid,
                                     const OrientedSimplicialComplex& c,
                                     const MeshGeometry& geom, double eps) {
    if (c.dim() < 1)
        throw InvalidParameter("validate_resolution: complex has no edges");
    ResolutionReport r;
    r.h_aux = grid.spacing.maxCoeff();
    r.eps = eps;
    double mean_edge = geom.volumes[1].mean();
    double diag = (geom.bbox_max - geom.bbox_min).norm();
    r.suggested_eps = std::sqrt(mean_edge * diag);
    if (r.h_aux <= 0.5 * eps) {
        r.status = ResolutionReport::Status::pass;
        r.message = "h_aux <= eps/2";
    } else if (r.h_aux <= eps) {
        r.status = ResolutionReport::Status::warn;
        r.message = "eps/2 < h_aux <= eps: kernel features are marginally "
                    "resolved";
    } else {
        r.status = ResolutionReport::Status::fail;
        r.message = "h_aux > eps: grid spacing cannot resolve the kernel";
    }
    return r;
}

FftPlan3d::FftPlan3d(Eigen::Vector3i res) : res_(res) {
    if ((res.array() < 1).any())
        throw InvalidParameter("FftPlan3d: invalid resolution");
    auto n = static_cast<std::size_t>(res.x()) * res.y() * res.z();
    auto* in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    fwd_ = fftw_plan_dft_3d(res.x(), res.y(), res.z(), in, out, FFTW_FORWARD,
                            FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_3d(res.x(), res.y(), res.z(), in, out, FFTW_BACKWARD,
                            FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    if (!fwd_ || !bwd_) throw Error("FftPlan3d: planning failed");
}

FftPlan3d::~FftPlan3d() {
    if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    if (bwd_) fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
}

namespace {

CMat execute_plan(void* plan, Eigen::Vector3i res, const CMat& grids) {
    auto n = static_cast<std::size_t>(res.x()) * res.y() * res.z();
    if (grids.rows() != static_cast<Eigen::Index>(n))
        throw DimensionMismatch("fft: grid size mismatch");
    // Fresh aligned buffers per call keep execution thread-safe.
    auto* in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    CMat result(grids.rows(), grids.cols());
    for (Eigen::Index c = 0; c < grids.cols(); ++c) {
        std::memcpy(in, grids.col(c).data(), sizeof(fftw_complex) * n);
        fftw_execute_dft(static_cast<fftw_plan>(plan), in, out);
        std::memcpy(result.col(c).data(), out, sizeof(fftw_complex) * n);
    }
    fftw_free(in);
    fftw_free(out);
    return result;
}

Eigen::Index freq_id(Eigen::Vector3i res, int k1, int k2, int k3) {
    return (static_cast<Eigen::Index>(k1) * res.y() + k2) * res.z() + k3;
}

void check_kernel(const FftPlan3d& plan, const SpectralKernel& kernel) {
    if ((kernel.modes.array() < 1).any() ||
        (kernel.modes.array() > plan.res().array()).any())
        throw InvalidParameter("spectral kernel: modes outside [1, res]");
    if (kernel.weights.rows() != kernel.num_modes() ||
        kernel.weights.cols() !=
            static_cast<Eigen::Index>(kernel.cout) * kernel.cin)
        throw DimensionMismatch("spectral kernel: weight shape mismatch");
}

} // namespace

CMat FftPlan3d::forward(const CMat& grids) const {
    return execute_plan(fwd_, res_, grids);
}

CMat FftPlan3d::backward(const CMat& grids) const {
    return execute_plan(bwd_, res_, grids);
}

CMat spectral_mode_coeffs(const FftPlan3d& plan, const SpectralKernel& kernel,
                          const Mat& field) {
    check_kernel(plan, kernel);
    if (field.cols() != kernel.cin)
        throw DimensionMismatch("spectral_conv: field channel mismatch");
    CMat spec = plan.forward(field.cast<std::complex<double>>());
    CMat coeffs(kernel.num_modes(), kernel.cin);
    Eigen::Index t = 0;
    for (int k1 = 0; k1 < kernel.modes.x(); ++k1)
        for (int k2 = 0; k2 < kernel.modes.y(); ++k2)
            for (int k3 = 0; k3 < kernel.modes.z(); ++k3, ++t)
                coeffs.row(t) = spec.row(freq_id(plan.res(), k1, k2, k3));
    return coeffs;
}

Mat spectral_scatter_ifft(const FftPlan3d& plan, const SpectralKernel& kernel,
                          const CMat& mixed) {
    check_kernel(plan, kernel);
    if (mixed.rows() != kernel.num_modes() || mixed.cols() != kernel.cout)
        throw DimensionMismatch("spectral_conv: mixed coefficient shape");
    const auto res = plan.res();
    const auto V = static_cast<Eigen::Index>(res.x()) * res.y() * res.z();
    CMat spec = CMat::Zero(V, kernel.cout);
    std::vector<bool> claimed(static_cast<std::size_t>(V), false);

    Eigen::Index t = 0;
    for (int k1 = 0; k1 < kernel.modes.x(); ++k1)
        for (int k2 = 0; k2 < kernel.modes.y(); ++k2)
            for (int k3 = 0; k3 < kernel.modes.z(); ++k3, ++t) {
                Eigen::Index id = freq_id(res, k1, k2, k3);
                if (claimed[static_cast<std::size_t>(id)]) continue;
                claimed[static_cast<std::size_t>(id)] = true;
                spec.row(id) = mixed.row(t);
                int m1 = (res.x() - k1) % res.x();
                int m2 = (res.y() - k2) % res.y();
                int m3 = (res.z() - k3) % res.z();
                Eigen::Index mid = freq_id(res, m1, m2, m3);
                if (mid != id && !claimed[static_cast<std::size_t>(mid)]) {
                    claimed[static_cast<std::size_t>(mid)] = true;
                    spec.row(mid) = mixed.row(t).conjugate();
                }
            }
    CMat out = plan.backward(spec);
    return out.real() / static_cast<double>(V);
}

CMat spectral_conv_grad_mixed(const FftPlan3d& plan,
                              const SpectralKernel& kernel,
                              const Mat& grad_out) {
    check_kernel(plan, kernel);
    if ((2 * kernel.modes.array() > plan.res().array()).any())
        throw InvalidParameter(
            "spectral_conv_grad_mixed: needs 2 * modes <= res per axis");
    if (grad_out.cols() != kernel.cout)
        throw DimensionMismatch("spectral_conv_grad_mixed: channel mismatch");
    const auto res = plan.res();
    const auto V = static_cast<Eigen::Index>(res.x()) * res.y() * res.z();
    CMat spec =
        plan.forward(grad_out.cast<std::complex<double>>()) / static_cast<double>(V);
    CMat grad(kernel.num_modes(), kernel.cout);
    Eigen::Index t = 0;
    for (int k1 = 0; k1 < kernel.modes.x(); ++k1)
        for (int k2 = 0; k2 < kernel.modes.y(); ++k2)
            for (int k3 = 0; k3 < kernel.modes.z(); ++k3, ++t) {
                bool self_mirror = (k1 == 0 && k2 == 0 && k3 == 0);
                grad.row(t) = (self_mirror ? 1.0 : 2.0) *
                              spec.row(freq_id(res, k1, k2, k3));
            }
    return grad;
}

Mat spectral_conv_grad_field(const FftPlan3d& plan,
                             const SpectralKernel& kernel,
                             const CMat& grad_coeffs) {
    check_kernel(plan, kernel);
    if (grad_coeffs.rows() != kernel.num_modes() ||
        grad_coeffs.cols() != kernel.cin)
        throw DimensionMismatch("spectral_conv_grad_field: coefficient shape");
    const auto res = plan.res();
    const auto V = static_cast<Eigen::Index>(res.x()) * res.y() * res.z();
    CMat spec = CMat::Zero(V, kernel.cin);
    Eigen::Index t = 0;
    for (int k1 = 0; k1 < kernel.modes.x(); ++k1)
        for (int k2 = 0; k2 < kernel.modes.y(); ++k2)
            for (int k3 = 0; k3 < kernel.modes.z(); ++k3, ++t)
                spec.row(freq_id(res, k1, k2, k3)) = grad_coeffs.row(t);
    return plan.backward(spec).real();
}

Mat spectral_conv(const FftPlan3d& plan, const SpectralKernel& kernel,
                  const Mat& field) {
    CMat coeffs = spectral_mode_coeffs(plan, kernel, field);
    CMat mixed(kernel.num_modes(), kernel.cout);
    for (Eigen::Index t = 0; t < kernel.num_modes(); ++t)
        for (int o = 0; o < kernel.cout; ++o) {
            std::complex<double> acc = 0.0;
            for (int i = 0; i < kernel.cin; ++i)
                acc += kernel.weights(t, static_cast<Eigen::Index>(o) *
                                             kernel.cin + i) * coeffs(t, i);
            mixed(t, o) = acc;
        }
    return spectral_scatter_ifft(plan, kernel, mixed);
}

} // namespace hsdop
