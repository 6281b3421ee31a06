#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evseg {

struct dim_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct domain_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct contract_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int numel(const std::vector<int>& shape);

/// Dense row-major float64 tensor, at most 4 axes (NCHW layout for images).
/// `node` is the handle of the node that produced this value on the active
/// tape, or -1 when the value is not being traced.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    int node = -1;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);

    int size() const { return static_cast<int>(data.size()); }
    bool traced() const { return node >= 0; }
    double item() const;
};

/// Reverse-mode tape. Nodes are appended in creation order, so every node's
/// inputs precede it; backward walks the nodes exactly once in reverse
/// creation order. A tape is one-shot: a second backward() without reset()
/// is rejected with contract_error.
class Tape {
  public:
    using BackFn = std::function<void(Tape&, const std::vector<double>&)>;

    /// Register a leaf (parameter or input) for gradient accumulation.
    void watch(Tensor& t);

    /// Accumulate d(root)/d(node) for every node. root must be scalar.
    void backward(const Tensor& root);

    const std::vector<double>& grad(const Tensor& t) const;

    void reset();

    size_t num_nodes() const { return nodes_.size(); }

    // Exposed for ops (including module-defined ops such as the spline
    // basis) that register custom backward functions.
    int add_node(BackFn fn, int out_size);
    std::vector<double>& grad_buf(int id);

  private:
    struct Node {
        BackFn fn;  // empty for leaves
    };
    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    bool ran_backward_ = false;
};

// ---- op vocabulary -------------------------------------------------------
// Every op validates shapes, checks the output for NaN/Inf (numeric_error
// naming the op), and appends a tape node when `tape` is non-null and at
// least one input is traced.

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor div(Tape* tape, const Tensor& a, const Tensor& b);
/// y = scale*x + shift, elementwise.
Tensor affine(Tape* tape, const Tensor& x, double scale, double shift);

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor transpose2d(Tape* tape, const Tensor& x);

/// x: Cin x H x W, w: Cout x Cin x kh x kw, bias: Cout (may be empty).
/// Stride 1, zero padding `pad`, dilation `dilation`.
Tensor conv2d(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& bias,
              int pad, int dilation = 1);
Tensor avgpool(Tape* tape, const Tensor& x, int stride);
Tensor upsample_nearest(Tape* tape, const Tensor& x, int factor);

Tensor relu(Tape* tape, const Tensor& x);
Tensor silu(Tape* tape, const Tensor& x);
Tensor exp(Tape* tape, const Tensor& x);
/// y = e^{-x}
Tensor neg_exp(Tape* tape, const Tensor& x);
Tensor log(Tape* tape, const Tensor& x);
Tensor clamp(Tape* tape, const Tensor& x, double lo, double hi);
Tensor clamp_min(Tape* tape, const Tensor& x, double lo);

/// Row-wise softmax of a 2D tensor.
Tensor softmax_rows(Tape* tape, const Tensor& x);

Tensor sum(Tape* tape, const Tensor& x);
Tensor mean(Tape* tape, const Tensor& x);
/// C x H x W -> H x W (sum over the channel axis).
Tensor sum_channels(Tape* tape, const Tensor& x);
/// H x W -> C x H x W.
Tensor broadcast_channels(Tape* tape, const Tensor& x, int channels);
/// scalar -> arbitrary shape.
Tensor broadcast_scalar(Tape* tape, const Tensor& x, std::vector<int> shape);

Tensor reshape(Tape* tape, const Tensor& x, std::vector<int> shape);
Tensor concat_channels(Tape* tape, const Tensor& a, const Tensor& b);

/// Central finite-difference check of the scalar function built by `f`.
/// Returns max over coordinates of |analytic - central| / max(1, |analytic|).
double finite_diff_check(const std::function<Tensor(Tape&, Tensor&)>& f,
                         const Tensor& x0, double step);

}  // namespace evseg
