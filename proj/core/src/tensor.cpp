#include "evseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evseg {

int numel(const std::vector<int>& shape) {
    int n = 1;
    for (int e : shape) {
        if (e <= 0) throw dim_error("non-positive extent in shape");
        n *= e;
    }
    return n;
}

Tensor::Tensor(std::vector<int> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (shape.size() > 4) throw dim_error("tensors are limited to 4 axes");
    if (numel(shape) != static_cast<int>(data.size()))
        throw dim_error("shape/data size mismatch");
}

Tensor Tensor::zeros(std::vector<int> shape) {
    int n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    int n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

double Tensor::item() const {
    if (data.size() != 1) throw contract_error("item() on non-scalar tensor");
    return data[0];
}

// ---- tape ----------------------------------------------------------------

void Tape::watch(Tensor& t) {
    nodes_.push_back(Node{BackFn{}});
    grads_.emplace_back(t.data.size(), 0.0);
    t.node = static_cast<int>(nodes_.size()) - 1;
}

int Tape::add_node(BackFn fn, int out_size) {
    nodes_.push_back(Node{std::move(fn)});
    grads_.emplace_back(out_size, 0.0);
    return static_cast<int>(nodes_.size()) - 1;
}

std::vector<double>& Tape::grad_buf(int id) { return grads_.at(id); }

void Tape::backward(const Tensor& root) {
    if (root.data.size() != 1)
        throw contract_error("backward requires a scalar root");
    if (root.node < 0)
        throw contract_error("backward root is not on this tape");
    if (ran_backward_)
        throw contract_error("backward already run on this tape; reset() first");
    ran_backward_ = true;
    grads_[root.node][0] = 1.0;
    for (int id = root.node; id >= 0; --id) {
        if (nodes_[id].fn) nodes_[id].fn(*this, grads_[id]);
    }
}

const std::vector<double>& Tape::grad(const Tensor& t) const {
    if (t.node < 0) throw contract_error("grad() of an untraced tensor");
    return grads_.at(t.node);
}

void Tape::reset() {
    nodes_.clear();
    grads_.clear();
    ran_backward_ = false;
}

// ---- helpers -------------------------------------------------------------

namespace {

void check_finite(const Tensor& t, const char* op) {
    for (double v : t.data) {
        if (!std::isfinite(v))
            throw numeric_error(std::string("non-finite output from op '") + op + "'");
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw dim_error(std::string(op) + ": shape mismatch");
}

bool tracing(Tape* tape, const Tensor& a) { return tape && a.traced(); }
bool tracing(Tape* tape, const Tensor& a, const Tensor& b) {
    return tape && (a.traced() || b.traced());
}

// Elementwise binary op: fa/fb give d(out)/d(a) and d(out)/d(b) per element.
template <class F, class Da, class Db>
Tensor ew_binary(Tape* tape, const Tensor& a, const Tensor& b, const char* op,
                 F f, Da da, Db db) {
    require_same_shape(a, b, op);
    Tensor out = Tensor::zeros(a.shape);
    const int n = out.size();
    for (int i = 0; i < n; ++i) out.data[i] = f(a.data[i], b.data[i]);
    check_finite(out, op);
    if (tracing(tape, a, b)) {
        int ida = a.node, idb = b.node;
        std::vector<double> av = a.data, bv = b.data;
        out.node = tape->add_node(
            [ida, idb, av, bv, da, db, n](Tape& t, const std::vector<double>& g) {
                if (ida >= 0) {
                    auto& ga = t.grad_buf(ida);
                    for (int i = 0; i < n; ++i) ga[i] += g[i] * da(av[i], bv[i]);
                }
                if (idb >= 0) {
                    auto& gb = t.grad_buf(idb);
                    for (int i = 0; i < n; ++i) gb[i] += g[i] * db(av[i], bv[i]);
                }
            },
            n);
    }
    return out;
}

// Elementwise unary op with derivative d(x).
template <class F, class D>
Tensor ew_unary(Tape* tape, const Tensor& x, const char* op, F f, D d) {
    Tensor out = Tensor::zeros(x.shape);
    const int n = out.size();
    for (int i = 0; i < n; ++i) out.data[i] = f(x.data[i]);
    check_finite(out, op);
    if (tracing(tape, x)) {
        int idx = x.node;
        std::vector<double> xv = x.data;
        out.node = tape->add_node(
            [idx, xv, d, n](Tape& t, const std::vector<double>& g) {
                auto& gx = t.grad_buf(idx);
                for (int i = 0; i < n; ++i) gx[i] += g[i] * d(xv[i]);
            },
            n);
    }
    return out;
}

}  // namespace

// ---- elementwise ---------------------------------------------------------

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    return ew_binary(
        tape, a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
    return ew_binary(
        tape, a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
    return ew_binary(
        tape, a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(Tape* tape, const Tensor& a, const Tensor& b) {
    return ew_binary(
        tape, a, b, "div", [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor affine(Tape* tape, const Tensor& x, double scale, double shift) {
    return ew_unary(
        tape, x, "affine",
        [scale, shift](double v) { return scale * v + shift; },
        [scale](double) { return scale; });
}

Tensor relu(Tape* tape, const Tensor& x) {
    // Subgradient at 0 is 0.
    return ew_unary(
        tape, x, "relu", [](double v) { return v > 0 ? v : 0.0; },
        [](double v) { return v > 0 ? 1.0 : 0.0; });
}

Tensor silu(Tape* tape, const Tensor& x) {
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    return ew_unary(
        tape, x, "silu", [sig](double v) { return v * sig(v); },
        [sig](double v) {
            double s = sig(v);
            return s * (1.0 + v * (1.0 - s));
        });
}

Tensor exp(Tape* tape, const Tensor& x) {
    return ew_unary(
        tape, x, "exp", [](double v) { return std::exp(v); },
        [](double v) { return std::exp(v); });
}

Tensor neg_exp(Tape* tape, const Tensor& x) {
    return ew_unary(
        tape, x, "neg_exp", [](double v) { return std::exp(-v); },
        [](double v) { return -std::exp(-v); });
}

Tensor log(Tape* tape, const Tensor& x) {
    for (double v : x.data)
        if (v <= 0.0) throw domain_error("log: non-positive input");
    return ew_unary(
        tape, x, "log", [](double v) { return std::log(v); },
        [](double v) { return 1.0 / v; });
}

Tensor clamp(Tape* tape, const Tensor& x, double lo, double hi) {
    return ew_unary(
        tape, x, "clamp",
        [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
        [lo, hi](double v) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor clamp_min(Tape* tape, const Tensor& x, double lo) {
    return ew_unary(
        tape, x, "clamp_min", [lo](double v) { return std::max(v, lo); },
        [lo](double v) { return v > lo ? 1.0 : 0.0; });
}

// ---- linear algebra ------------------------------------------------------

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
        throw dim_error("matmul: incompatible shapes");
    const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = a.data[i * k + p];
            const double* brow = &b.data[p * n];
            double* orow = &out.data[i * n];
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    check_finite(out, "matmul");
    if (tracing(tape, a, b)) {
        int ida = a.node, idb = b.node;
        std::vector<double> av = a.data, bv = b.data;
        out.node = tape->add_node(
            [ida, idb, av, bv, m, k, n](Tape& t, const std::vector<double>& g) {
                if (ida >= 0) {
                    auto& ga = t.grad_buf(ida);  // g (m,n) * b^T (n,k)
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < n; ++j) {
                            const double gv = g[i * n + j];
                            for (int p = 0; p < k; ++p)
                                ga[i * k + p] += gv * bv[p * n + j];
                        }
                }
                if (idb >= 0) {
                    auto& gb = t.grad_buf(idb);  // a^T (k,m) * g (m,n)
                    for (int i = 0; i < m; ++i)
                        for (int p = 0; p < k; ++p) {
                            const double avv = av[i * k + p];
                            for (int j = 0; j < n; ++j)
                                gb[p * n + j] += avv * g[i * n + j];
                        }
                }
            },
            m * n);
    }
    return out;
}

Tensor transpose2d(Tape* tape, const Tensor& x) {
    if (x.shape.size() != 2) throw dim_error("transpose2d: need 2D tensor");
    const int m = x.shape[0], n = x.shape[1];
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.data[j * m + i] = x.data[i * n + j];
    if (tracing(tape, x)) {
        int idx = x.node;
        out.node = tape->add_node(
            [idx, m, n](Tape& t, const std::vector<double>& g) {
                auto& gx = t.grad_buf(idx);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) gx[i * n + j] += g[j * m + i];
            },
            m * n);
    }
    return out;
}

// ---- convolution / resampling --------------------------------------------

Tensor conv2d(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& bias,
              int pad, int dilation) {
    if (x.shape.size() != 3 || w.shape.size() != 4)
        throw dim_error("conv2d: expected x C x H x W and w O x C x kh x kw");
    const int ci = x.shape[0], h = x.shape[1], wd = x.shape[2];
    const int co = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    if (w.shape[1] != ci) throw dim_error("conv2d: channel mismatch");
    const bool has_bias = !bias.data.empty();
    if (has_bias && (bias.shape.size() != 1 || bias.shape[0] != co))
        throw dim_error("conv2d: bias shape mismatch");
    const int oh = h + 2 * pad - dilation * (kh - 1);
    const int ow = wd + 2 * pad - dilation * (kw - 1);
    if (oh <= 0 || ow <= 0) throw dim_error("conv2d: output would be empty");

    Tensor out = Tensor::zeros({co, oh, ow});
    for (int o = 0; o < co; ++o) {
        double* oplane = &out.data[o * oh * ow];
        if (has_bias) {
            const double bv = bias.data[o];
            for (int i = 0; i < oh * ow; ++i) oplane[i] = bv;
        }
        for (int c = 0; c < ci; ++c) {
            const double* xplane = &x.data[c * h * wd];
            const double* wk = &w.data[(o * ci + c) * kh * kw];
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const double wv = wk[ky * kw + kx];
                    if (wv == 0.0) continue;
                    const int dy = ky * dilation - pad;
                    const int dx = kx * dilation - pad;
                    const int y0 = std::max(0, -dy), y1 = std::min(oh, h - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(ow, wd - dx);
                    for (int oy = y0; oy < y1; ++oy) {
                        const double* xrow = &xplane[(oy + dy) * wd + dx];
                        double* orow = &oplane[oy * ow];
                        for (int ox = x0; ox < x1; ++ox)
                            orow[ox] += wv * xrow[ox];
                    }
                }
            }
        }
    }
    check_finite(out, "conv2d");
    if (tape && (x.traced() || w.traced() || (has_bias && bias.traced()))) {
        int idx = x.node, idw = w.node, idb = has_bias ? bias.node : -1;
        std::vector<double> xv = x.data, wv = w.data;
        out.node = tape->add_node(
            [=](Tape& t, const std::vector<double>& g) {
                if (idb >= 0) {
                    auto& gb = t.grad_buf(idb);
                    for (int o = 0; o < co; ++o) {
                        double s = 0.0;
                        const double* gp = &g[o * oh * ow];
                        for (int i = 0; i < oh * ow; ++i) s += gp[i];
                        gb[o] += s;
                    }
                }
                for (int o = 0; o < co; ++o) {
                    const double* gplane = &g[o * oh * ow];
                    for (int c = 0; c < ci; ++c) {
                        for (int ky = 0; ky < kh; ++ky) {
                            for (int kx = 0; kx < kw; ++kx) {
                                const int dy = ky * dilation - pad;
                                const int dx = kx * dilation - pad;
                                const int y0 = std::max(0, -dy);
                                const int y1 = std::min(oh, h - dy);
                                const int x0 = std::max(0, -dx);
                                const int x1 = std::min(ow, wd - dx);
                                if (idw >= 0) {
                                    double s = 0.0;
                                    const double* xplane = &xv[c * h * wd];
                                    for (int oy = y0; oy < y1; ++oy) {
                                        const double* xrow =
                                            &xplane[(oy + dy) * wd + dx];
                                        const double* grow = &gplane[oy * ow];
                                        for (int ox = x0; ox < x1; ++ox)
                                            s += grow[ox] * xrow[ox];
                                    }
                                    t.grad_buf(idw)[(o * ci + c) * kh * kw +
                                                    ky * kw + kx] += s;
                                }
                                if (idx >= 0) {
                                    const double wvv =
                                        wv[(o * ci + c) * kh * kw + ky * kw + kx];
                                    if (wvv == 0.0) continue;
                                    auto& gx = t.grad_buf(idx);
                                    double* gxplane = &gx[c * h * wd];
                                    for (int oy = y0; oy < y1; ++oy) {
                                        double* gxrow =
                                            &gxplane[(oy + dy) * wd + dx];
                                        const double* grow = &gplane[oy * ow];
                                        for (int ox = x0; ox < x1; ++ox)
                                            gxrow[ox] += wvv * grow[ox];
                                    }
                                }
                            }
                        }
                    }
                }
            },
            co * oh * ow);
    }
    return out;
}

Tensor avgpool(Tape* tape, const Tensor& x, int stride) {
    if (x.shape.size() != 3) throw dim_error("avgpool: expected C x H x W");
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    if (stride <= 0 || h % stride != 0 || w % stride != 0)
        throw dim_error("avgpool: stride must divide H and W");
    const int oh = h / stride, ow = w / stride;
    const double inv = 1.0 / (stride * stride);
    Tensor out = Tensor::zeros({c, oh, ow});
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double s = 0.0;
                for (int dy = 0; dy < stride; ++dy)
                    for (int dx = 0; dx < stride; ++dx)
                        s += x.data[(ch * h + oy * stride + dy) * w +
                                    ox * stride + dx];
                out.data[(ch * oh + oy) * ow + ox] = s * inv;
            }
    check_finite(out, "avgpool");
    if (tracing(tape, x)) {
        int idx = x.node;
        out.node = tape->add_node(
            [idx, c, h, w, oh, ow, stride, inv](Tape& t,
                                                const std::vector<double>& g) {
                auto& gx = t.grad_buf(idx);
                for (int ch = 0; ch < c; ++ch)
                    for (int oy = 0; oy < oh; ++oy)
                        for (int ox = 0; ox < ow; ++ox) {
                            const double gv =
                                g[(ch * oh + oy) * ow + ox] * inv;
                            for (int dy = 0; dy < stride; ++dy)
                                for (int dx = 0; dx < stride; ++dx)
                                    gx[(ch * h + oy * stride + dy) * w +
                                       ox * stride + dx] += gv;
                        }
            },
            c * oh * ow);
    }
    return out;
}

Tensor upsample_nearest(Tape* tape, const Tensor& x, int factor) {
    if (x.shape.size() != 3) throw dim_error("upsample: expected C x H x W");
    if (factor <= 0) throw dim_error("upsample: factor must be positive");
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    const int oh = h * factor, ow = w * factor;
    Tensor out = Tensor::zeros({c, oh, ow});
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                out.data[(ch * oh + oy) * ow + ox] =
                    x.data[(ch * h + oy / factor) * w + ox / factor];
    if (tracing(tape, x)) {
        int idx = x.node;
        out.node = tape->add_node(
            [idx, c, h, w, oh, ow, factor](Tape& t,
                                           const std::vector<double>& g) {
                auto& gx = t.grad_buf(idx);
                for (int ch = 0; ch < c; ++ch)
                    for (int oy = 0; oy < oh; ++oy)
                        for (int ox = 0; ox < ow; ++ox)
                            gx[(ch * h + oy / factor) * w + ox / factor] +=
                                g[(ch * oh + oy) * ow + ox];
            },
            c * oh * ow);
    }
    return out;
}

// ---- softmax / reductions -------------------------------------------------

Tensor softmax_rows(Tape* tape, const Tensor& x) {
    if (x.shape.size() != 2) throw dim_error("softmax_rows: need 2D tensor");
    const int m = x.shape[0], n = x.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) {
        const double* row = &x.data[i * n];
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) z += std::exp(row[j] - mx);
        for (int j = 0; j < n; ++j) out.data[i * n + j] = std::exp(row[j] - mx) / z;
    }
    check_finite(out, "softmax");
    if (tracing(tape, x)) {
        int idx = x.node;
        std::vector<double> yv = out.data;
        out.node = tape->add_node(
            [idx, yv, m, n](Tape& t, const std::vector<double>& g) {
                auto& gx = t.grad_buf(idx);
                for (int i = 0; i < m; ++i) {
                    const double* y = &yv[i * n];
                    const double* gi = &g[i * n];
                    double dot = 0.0;
                    for (int j = 0; j < n; ++j) dot += y[j] * gi[j];
                    for (int j = 0; j < n; ++j)
                        gx[i * n + j] += y[j] * (gi[j] - dot);
                }
            },
            m * n);
    }
    return out;
}

Tensor sum(Tape* tape, const Tensor& x) {
    double s = std::accumulate(x.data.begin(), x.data.end(), 0.0);
    Tensor out = Tensor::scalar(s);
    check_finite(out, "sum");
    if (tracing(tape, x)) {
        int idx = x.node;
        const int n = x.size();
        out.node = tape->add_node(
            [idx, n](Tape& t, const std::vector<double>& g) {
                auto& gx = t.grad_buf(idx);
                for (int i = 0; i < n; ++i) gx[i] += g[0];
            },
            1);
    }
    return out;
}

Tensor mean(Tape* tape, const Tensor& x) {
    const int n = x.size();
    double s = std::accumulate(x.data.begin(), x.data.end(), 0.0) / n;
    Tensor out = Tensor::scalar(s);
    check_finite(out, "mean");
    if (tracing(tape, x)) {
        int idx = x.node;
        out.node = tape->add_node(
            [idx, n](Tape& t, const std::vector<double>& g) {
                auto& gx = t.grad_buf(idx);
                const double gv = g[0] / n;
                for (int i = 0; i < n; ++i) gx[i] += gv;
            },
            1);
    }
    return out;
}

Tensor sum_channels(Tape* tape, const Tensor& x) {
    if (x.shape.size() != 3) throw dim_error("sum_channels: expected C x H x W");
    const int c = x.shape[0], hw = x.shape[1] * x.shape[2];
    Tensor out = Tensor::zeros({x.shape[1], x.shape[2]});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < hw; ++i) out.data[i] += x.data[ch * hw + i];
    check_finite(out, "sum_channels");
    if (tracing(tape, x)) {
        int idx = x.node;
        out.node = tape->add_node(
            [idx, c, hw](Tape& t, const std::vector<double>& g) {
                auto& gx = t.grad_buf(idx);
                for (int ch = 0; ch < c; ++ch)
                    for (int i = 0; i < hw; ++i) gx[ch * hw + i] += g[i];
            },
            hw);
    }
    return out;
}

Tensor broadcast_channels(Tape* tape, const Tensor& x, int channels) {
    if (x.shape.size() != 2) throw dim_error("broadcast_channels: expected H x W");
    const int hw = x.size();
    Tensor out = Tensor::zeros({channels, x.shape[0], x.shape[1]});
    for (int ch = 0; ch < channels; ++ch)
        std::copy(x.data.begin(), x.data.end(), out.data.begin() + ch * hw);
    if (tracing(tape, x)) {
        int idx = x.node;
        out.node = tape->add_node(
            [idx, channels, hw](Tape& t, const std::vector<double>& g) {
                auto& gx = t.grad_buf(idx);
                for (int ch = 0; ch < channels; ++ch)
                    for (int i = 0; i < hw; ++i) gx[i] += g[ch * hw + i];
            },
            channels * hw);
    }
    return out;
}

Tensor broadcast_scalar(Tape* tape, const Tensor& x, std::vector<int> shape) {
    if (x.size() != 1) throw dim_error("broadcast_scalar: source must be scalar");
    Tensor out = Tensor::full(shape, x.data[0]);
    if (tracing(tape, x)) {
        int idx = x.node;
        const int n = out.size();
        out.node = tape->add_node(
            [idx, n](Tape& t, const std::vector<double>& g) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) s += g[i];
                t.grad_buf(idx)[0] += s;
            },
            out.size());
    }
    return out;
}

Tensor reshape(Tape* tape, const Tensor& x, std::vector<int> shape) {
    if (numel(shape) != x.size()) throw dim_error("reshape: size mismatch");
    Tensor out(shape, x.data);
    if (tracing(tape, x)) {
        int idx = x.node;
        const int n = x.size();
        out.node = tape->add_node(
            [idx, n](Tape& t, const std::vector<double>& g) {
                auto& gx = t.grad_buf(idx);
                for (int i = 0; i < n; ++i) gx[i] += g[i];
            },
            n);
    }
    return out;
}

Tensor concat_channels(Tape* tape, const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 3 || b.shape.size() != 3 || a.shape[1] != b.shape[1] ||
        a.shape[2] != b.shape[2])
        throw dim_error("concat_channels: spatial shape mismatch");
    const int ca = a.shape[0], cb = b.shape[0];
    Tensor out = Tensor::zeros({ca + cb, a.shape[1], a.shape[2]});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.size());
    if (tracing(tape, a, b)) {
        int ida = a.node, idb = b.node;
        const int na = a.size(), nb = b.size();
        out.node = tape->add_node(
            [ida, idb, na, nb](Tape& t, const std::vector<double>& g) {
                if (ida >= 0) {
                    auto& ga = t.grad_buf(ida);
                    for (int i = 0; i < na; ++i) ga[i] += g[i];
                }
                if (idb >= 0) {
                    auto& gb = t.grad_buf(idb);
                    for (int i = 0; i < nb; ++i) gb[i] += g[na + i];
                }
            },
            na + nb);
    }
    return out;
}

// ---- finite differences ----------------------------------------------------

double finite_diff_check(const std::function<Tensor(Tape&, Tensor&)>& f,
                         const Tensor& x0, double step) {
    if (step <= 0) throw contract_error("finite_diff_check: step must be > 0");
    Tape tape;
    Tensor x = x0;
    tape.watch(x);
    Tensor y = f(tape, x);
    if (y.size() != 1) throw contract_error("finite_diff_check: f must be scalar");
    tape.backward(y);
    std::vector<double> analytic = tape.grad(x);

    auto eval = [&](const Tensor& xt) {
        Tape t2;
        Tensor xc = xt;
        t2.watch(xc);
        return f(t2, xc).item();
    };

    double worst = 0.0;
    for (int i = 0; i < x0.size(); ++i) {
        Tensor xp = x0, xm = x0;
        xp.data[i] += step;
        xm.data[i] -= step;
        const double fd = (eval(xp) - eval(xm)) / (2.0 * step);
        const double err =
            std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace evseg
