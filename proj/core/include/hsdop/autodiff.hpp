#pragma once

#include <functional>
#include <vector>

#include "hsdop/ambient.hpp"

namespace hsdop::ad {

/// Handle to a node on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Single-use reverse-mode tape over dense real matrices. Nodes are created
/// in topological order by the builder calls below; backward() then sweeps
/// the list once in reverse. Values are immutable after creation, and every
/// pointer argument (sparse operators, dense projectors, FFT plans) is
/// non-owning and must outlive the tape.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that does not receive a gradient.
    Var constant(Mat value);
    /// Leaf that accumulates a gradient.
    Var param(Mat value);

    const Mat& value(Var v) const;
    /// Gradient of the loss wrt v; zeros if the node was never reached.
    const Mat& grad(Var v);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var add_const(Var a, Mat c);
    Var scale(Var a, double s);
    Var matmul(Var a, Var b);
    /// A * b with a constant dense left factor.
    Var matmul_const(const Mat* A, Var b);
    /// A * b with a constant sparse left factor.
    Var sparse_matmul(const SpMat* A, Var b);
    /// Row scaling diag(d) * a.
    Var diag_scale(Vec d, Var a);
    Var hadamard(Var a, Var b);
    Var silu(Var a);
    /// a + bias broadcast over rows; bias is 1 x C.
    Var add_rowvec(Var a, Var bias);
    /// Replicate a 1 x C row n times.
    Var broadcast_row(Var row, Eigen::Index n);
    Var concat_cols(const std::vector<Var>& parts);
    Var concat_rows(const std::vector<Var>& parts);
    Var slice_cols(Var a, Eigen::Index begin, Eigen::Index n);
    /// Column-major reinterpretation, same element count.
    Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
    /// s * a with a 1 x 1 variable scale.
    Var scalar_mul(Var s, Var a);

    /// Truncated spectral convolution of a (V x cin) field. weights is real
    /// with interleaved pairs: column 2*(o*cin + i) holds Re W(o, i) of mode
    /// t in row t, column 2*(o*cin + i) + 1 holds Im W(o, i). Requires
    /// 2 * modes <= grid resolution per axis.
    Var spectral_conv(const FftPlan3d* plan, Eigen::Vector3i modes, Var weights,
                      Var field);

    /// sum_i w_i * sum_j a(i, j)^2 as a 1 x 1 scalar.
    Var sumsq_weighted(Vec w, Var a);
    /// sum |a_ij| as a 1 x 1 scalar (sign subgradient at zero).
    Var l1(Var a);
    /// Square root of a nonnegative 1 x 1 scalar.
    Var sqrt_scalar(Var a);

    /// Seed d(loss)/d(loss) = 1 and sweep. loss must be 1 x 1; single use.
    void backward(Var loss);

private:
    struct Node {
        Mat value;
        Mat grad;
        bool track = false;
        std::function<void()> pull;
    };

    Var make(Mat value, bool track, std::function<void()> pull);
    void accum(int id, const Mat& g);
    const Node& node(Var v) const;
    bool tracked(Var v) const { return node(v).track; }

    std::vector<Node> nodes_;
    bool swept_ = false;
};

} // namespace hsdop::ad
