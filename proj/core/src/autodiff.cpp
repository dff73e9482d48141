#include "hsdop/autodiff.hpp"

#include <cmath>

namespace hsdop::ad {

namespace {

Mat sigmoid(const Mat& x) {
    return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

} // namespace

Var Tape::make(Mat value, bool track, std::function<void()> pull) {
    Node n;
    n.value = std::move(value);
    n.track = track;
    n.pull = std::move(pull);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
        throw IndexOutOfRange("tape: invalid variable handle");
    return nodes_[static_cast<std::size_t>(v.id)];
}

void Tape::accum(int id, const Mat& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.track) return;
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad += g;
}

Var Tape::constant(Mat value) { return make(std::move(value), false, nullptr); }

Var Tape::param(Mat value) { return make(std::move(value), true, nullptr); }

const Mat& Tape::value(Var v) const { return node(v).value; }

const Mat& Tape::grad(Var v) {
    node(v);  // bounds check
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

Var Tape::add(Var a, Var b) {
    if (value(a).rows() != value(b).rows() ||
        value(a).cols() != value(b).cols())
        throw DimensionMismatch("tape add: shape mismatch");
    Mat v = value(a) + value(b);
    bool track = tracked(a) || tracked(b);
    int ia = a.id, ib = b.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), track, [this, ia, ib, out] {
        const Mat& g = nodes_[static_cast<std::size_t>(out)].grad;
        accum(ia, g);
        accum(ib, g);
    });
}

Var Tape::sub(Var a, Var b) {
    if (value(a).rows() != value(b).rows() ||
        value(a).cols() != value(b).cols())
        throw DimensionMismatch("tape sub: shape mismatch");
    Mat v = value(a) - value(b);
    bool track = tracked(a) || tracked(b);
    int ia = a.id, ib = b.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), track, [this, ia, ib, out] {
        const Mat& g = nodes_[static_cast<std::size_t>(out)].grad;
        accum(ia, g);
        accum(ib, -g);
    });
}

Var Tape::add_const(Var a, Mat c) {
    if (value(a).rows() != c.rows() || value(a).cols() != c.cols())
        throw DimensionMismatch("tape add_const: shape mismatch");
    Mat v = value(a) + c;
    int ia = a.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), tracked(a), [this, ia, out] {
        accum(ia, nodes_[static_cast<std::size_t>(out)].grad);
    });
}

Var Tape::scale(Var a, double s) {
    Mat v = s * value(a);
    int ia = a.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), tracked(a), [this, ia, out, s] {
        accum(ia, s * nodes_[static_cast<std::size_t>(out)].grad);
    });
}

Var Tape::matmul(Var a, Var b) {
    if (value(a).cols() != value(b).rows())
        throw DimensionMismatch("tape matmul: inner dimension mismatch");
    Mat v = value(a) * value(b);
    bool track = tracked(a) || tracked(b);
    int ia = a.id, ib = b.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), track, [this, ia, ib, out] {
        const Mat& g = nodes_[static_cast<std::size_t>(out)].grad;
        accum(ia, g * nodes_[static_cast<std::size_t>(ib)].value.transpose());
        accum(ib, nodes_[static_cast<std::size_t>(ia)].value.transpose() * g);
    });
}

Var Tape::matmul_const(const Mat* A, Var b) {
    if (A->cols() != value(b).rows())
        throw DimensionMismatch("tape matmul_const: inner dimension mismatch");
    Mat v = (*A) * value(b);
    int ib = b.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), tracked(b), [this, A, ib, out] {
        accum(ib, A->transpose() *
                      nodes_[static_cast<std::size_t>(out)].grad);
    });
}

Var Tape::sparse_matmul(const SpMat* A, Var b) {
    if (A->cols() != value(b).rows())
        throw DimensionMismatch("tape sparse_matmul: inner dimension mismatch");
    Mat v = (*A) * value(b);
    int ib = b.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), tracked(b), [this, A, ib, out] {
        accum(ib, A->transpose() *
                      nodes_[static_cast<std::size_t>(out)].grad);
    });
}

Var Tape::diag_scale(Vec d, Var a) {
    if (d.size() != value(a).rows())
        throw DimensionMismatch("tape diag_scale: row count mismatch");
    Mat v = d.asDiagonal() * value(a);
    int ia = a.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), tracked(a), [this, ia, out, d = std::move(d)] {
        accum(ia, d.asDiagonal() * nodes_[static_cast<std::size_t>(out)].grad);
    });
}

Var Tape::hadamard(Var a, Var b) {
    if (value(a).rows() != value(b).rows() ||
        value(a).cols() != value(b).cols())
        throw DimensionMismatch("tape hadamard: shape mismatch");
    Mat v = value(a).cwiseProduct(value(b));
    bool track = tracked(a) || tracked(b);
    int ia = a.id, ib = b.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), track, [this, ia, ib, out] {
        const Mat& g = nodes_[static_cast<std::size_t>(out)].grad;
        accum(ia, g.cwiseProduct(nodes_[static_cast<std::size_t>(ib)].value));
        accum(ib, g.cwiseProduct(nodes_[static_cast<std::size_t>(ia)].value));
    });
}

Var Tape::silu(Var a) {
    Mat sig = sigmoid(value(a));
    Mat v = value(a).cwiseProduct(sig);
    int ia = a.id, out = static_cast<int>(nodes_.size());
    // d silu / dx = sig * (1 + x * (1 - sig))
    Mat dsilu =
        (sig.array() * (1.0 + value(a).array() * (1.0 - sig.array()))).matrix();
    return make(std::move(v), tracked(a),
                [this, ia, out, dsilu = std::move(dsilu)] {
                    accum(ia, nodes_[static_cast<std::size_t>(out)]
                                  .grad.cwiseProduct(dsilu));
                });
}

Var Tape::add_rowvec(Var a, Var bias) {
    if (value(bias).rows() != 1 || value(bias).cols() != value(a).cols())
        throw DimensionMismatch("tape add_rowvec: bias must be 1 x cols(a)");
    Mat v = value(a).rowwise() + value(bias).row(0);
    bool track = tracked(a) || tracked(bias);
    int ia = a.id, ib = bias.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), track, [this, ia, ib, out] {
        const Mat& g = nodes_[static_cast<std::size_t>(out)].grad;
        accum(ia, g);
        accum(ib, g.colwise().sum());
    });
}

Var Tape::broadcast_row(Var row, Eigen::Index n) {
    if (value(row).rows() != 1)
        throw DimensionMismatch("tape broadcast_row: input must be 1 x C");
    Mat v = value(row).replicate(n, 1);
    int ir = row.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), tracked(row), [this, ir, out] {
        accum(ir, nodes_[static_cast<std::size_t>(out)].grad.colwise().sum());
    });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw InvalidParameter("tape concat_cols: empty list");
    Eigen::Index rows = value(parts[0]).rows(), cols = 0;
    bool track = false;
    for (Var p : parts) {
        if (value(p).rows() != rows)
            throw DimensionMismatch("tape concat_cols: row count mismatch");
        cols += value(p).cols();
        track = track || tracked(p);
    }
    Mat v(rows, cols);
    Eigen::Index at = 0;
    std::vector<std::pair<int, Eigen::Index>> spans;
    for (Var p : parts) {
        Eigen::Index w = value(p).cols();
        v.middleCols(at, w) = value(p);
        spans.emplace_back(p.id, at);
        at += w;
    }
    int out = static_cast<int>(nodes_.size());
    return make(std::move(v), track, [this, out, spans = std::move(spans)] {
        const Mat& g = nodes_[static_cast<std::size_t>(out)].grad;
        for (auto [id, begin] : spans) {
            const Node& in = nodes_[static_cast<std::size_t>(id)];
            accum(id, g.middleCols(begin, in.value.cols()));
        }
    });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw InvalidParameter("tape concat_rows: empty list");
    Eigen::Index cols = value(parts[0]).cols(), rows = 0;
    bool track = false;
    for (Var p : parts) {
        if (value(p).cols() != cols)
            throw DimensionMismatch("tape concat_rows: column count mismatch");
        rows += value(p).rows();
        track = track || tracked(p);
    }
    Mat v(rows, cols);
    Eigen::Index at = 0;
    std::vector<std::pair<int, Eigen::Index>> spans;
    for (Var p : parts) {
        Eigen::Index h = value(p).rows();
        v.middleRows(at, h) = value(p);
        spans.emplace_back(p.id, at);
        at += h;
    }
    int out = static_cast<int>(nodes_.size());
    return make(std::move(v), track, [this, out, spans = std::move(spans)] {
        const Mat& g = nodes_[static_cast<std::size_t>(out)].grad;
        for (auto [id, begin] : spans) {
            const Node& in = nodes_[static_cast<std::size_t>(id)];
            accum(id, g.middleRows(begin, in.value.rows()));
        }
    });
}

Var Tape::slice_cols(Var a, Eigen::Index begin, Eigen::Index n) {
    if (begin < 0 || n < 0 || begin + n > value(a).cols())
        throw IndexOutOfRange("tape slice_cols: range out of bounds");
    Mat v = value(a).middleCols(begin, n);
    int ia = a.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), tracked(a), [this, ia, out, begin, n] {
        const Node& in = nodes_[static_cast<std::size_t>(ia)];
        Mat g = Mat::Zero(in.value.rows(), in.value.cols());
        g.middleCols(begin, n) = nodes_[static_cast<std::size_t>(out)].grad;
        accum(ia, g);
    });
}

Var Tape::reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
    const Mat& av = value(a);
    if (rows * cols != av.size())
        throw DimensionMismatch("tape reshape: element count mismatch");
    Mat v = Eigen::Map<const Mat>(av.data(), rows, cols);
    int ia = a.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), tracked(a), [this, ia, out] {
        const Node& in = nodes_[static_cast<std::size_t>(ia)];
        const Mat& g = nodes_[static_cast<std::size_t>(out)].grad;
        accum(ia, Eigen::Map<const Mat>(g.data(), in.value.rows(),
                                        in.value.cols()));
    });
}

Var Tape::scalar_mul(Var s, Var a) {
    if (value(s).size() != 1)
        throw DimensionMismatch("tape scalar_mul: scale must be 1 x 1");
    double sv = value(s)(0, 0);
    Mat v = sv * value(a);
    bool track = tracked(s) || tracked(a);
    int is = s.id, ia = a.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), track, [this, is, ia, out, sv] {
        const Mat& g = nodes_[static_cast<std::size_t>(out)].grad;
        const Mat& av = nodes_[static_cast<std::size_t>(ia)].value;
        Mat gs(1, 1);
        gs(0, 0) = g.cwiseProduct(av).sum();
        accum(is, gs);
        accum(ia, sv * g);
    });
}

Var Tape::spectral_conv(const FftPlan3d* plan, Eigen::Vector3i modes,
                        Var weights, Var field) {
    if ((2 * modes.array() > plan->res().array()).any())
        throw InvalidParameter("tape spectral_conv: needs 2 * modes <= res");
    const Mat& wv = value(weights);
    const Mat& fv = value(field);
    const int cin = static_cast<int>(fv.cols());
    if (cin < 1 || wv.cols() % (2 * cin) != 0)
        throw DimensionMismatch(
            "tape spectral_conv: weight columns must be 2 * cout * cin");
    const int cout = static_cast<int>(wv.cols() / (2 * cin));

    auto build_kernel = [modes, cin, cout](const Mat& w) {
        SpectralKernel k;
        k.modes = modes;
        k.cin = cin;
        k.cout = cout;
        k.weights.resize(k.num_modes(),
                         static_cast<Eigen::Index>(cout) * cin);
        for (Eigen::Index t = 0; t < k.num_modes(); ++t)
            for (Eigen::Index p = 0; p < k.weights.cols(); ++p)
                k.weights(t, p) = {w(t, 2 * p), w(t, 2 * p + 1)};
        return k;
    };

    SpectralKernel kernel = build_kernel(wv);
    if (wv.rows() != kernel.num_modes())
        throw DimensionMismatch("tape spectral_conv: weight rows != n_modes");
    Mat v = hsdop::spectral_conv(*plan, kernel, fv);

    bool track = tracked(weights) || tracked(field);
    int iw = weights.id, ifd = field.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), track,
                [this, plan, build_kernel, iw, ifd, out, cin, cout] {
        const Mat& g = nodes_[static_cast<std::size_t>(out)].grad;
        const Mat& w = nodes_[static_cast<std::size_t>(iw)].value;
        const Mat& f = nodes_[static_cast<std::size_t>(ifd)].value;
        SpectralKernel kernel = build_kernel(w);
        CMat T = spectral_conv_grad_mixed(*plan, kernel, g);
        CMat X = spectral_mode_coeffs(*plan, kernel, f);

        Mat gw = Mat::Zero(w.rows(), w.cols());
        CMat gx = CMat::Zero(kernel.num_modes(), cin);
        for (Eigen::Index t = 0; t < kernel.num_modes(); ++t)
            for (int i = 0; i < cin; ++i) {
                std::complex<double> acc = 0.0;
                for (int o = 0; o < cout; ++o) {
                    Eigen::Index p = static_cast<Eigen::Index>(o) * cin + i;
                    std::complex<double> gp = T(t, o) * std::conj(X(t, i));
                    gw(t, 2 * p) = gp.real();
                    gw(t, 2 * p + 1) = gp.imag();
                    acc += std::conj(kernel.weights(t, p)) * T(t, o);
                }
                gx(t, i) = acc;
            }
        accum(iw, gw);
        accum(ifd, spectral_conv_grad_field(*plan, kernel, gx));
    });
}

Var Tape::sumsq_weighted(Vec w, Var a) {
    if (w.size() != value(a).rows())
        throw DimensionMismatch("tape sumsq_weighted: weight length mismatch");
    Mat v(1, 1);
    v(0, 0) = (w.asDiagonal() * value(a).cwiseProduct(value(a))).sum();
    int ia = a.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), tracked(a), [this, ia, out, w = std::move(w)] {
        double g = nodes_[static_cast<std::size_t>(out)].grad(0, 0);
        const Mat& av = nodes_[static_cast<std::size_t>(ia)].value;
        accum(ia, 2.0 * g * (w.asDiagonal() * av));
    });
}

Var Tape::l1(Var a) {
    Mat v(1, 1);
    v(0, 0) = value(a).cwiseAbs().sum();
    int ia = a.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), tracked(a), [this, ia, out] {
        double g = nodes_[static_cast<std::size_t>(out)].grad(0, 0);
        const Mat& av = nodes_[static_cast<std::size_t>(ia)].value;
        accum(ia, g * av.unaryExpr([](double x) {
            return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
        }));
    });
}

Var Tape::sqrt_scalar(Var a) {
    if (value(a).size() != 1)
        throw DimensionMismatch("tape sqrt_scalar: input must be 1 x 1");
    double x = value(a)(0, 0);
    if (x < 0) throw InvalidParameter("tape sqrt_scalar: negative input");
    Mat v(1, 1);
    v(0, 0) = std::sqrt(x);
    double denom = 2.0 * std::max(v(0, 0), 1e-150);
    int ia = a.id, out = static_cast<int>(nodes_.size());
    return make(std::move(v), tracked(a), [this, ia, out, denom] {
        accum(ia, nodes_[static_cast<std::size_t>(out)].grad / denom);
    });
}

void Tape::backward(Var loss) {
    if (swept_) throw Error("tape backward: already swept");
    const Mat& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1)
        throw DimensionMismatch("tape backward: loss must be 1 x 1");
    nodes_[static_cast<std::size_t>(loss.id)].grad = Mat::Ones(1, 1);
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.size() == 0 || !n.pull) continue;
        n.pull();
    }
    swept_ = true;
}

} // namespace hsdop::ad
