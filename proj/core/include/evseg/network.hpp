#pragma once

#include <string>
#include <utility>
#include <vector>

#include "evseg/euga.hpp"
#include "evseg/tensor.hpp"

namespace evseg {

struct NetConfig {
    int in_channels = 3;
    int classes = 2;
    std::vector<int> stage_channels = {16, 32, 64};
    int kan_grid = 8;         // spline intervals
    int kan_spline_order = 3; // cubic
    double kan_grid_extent = 3.0;
    EugaConfig euga;
    bool use_euga = true;
    unsigned long long seed = 0;
};

enum class SkipWiring { kEuga, kPlain };
SkipWiring skip_wiring(const NetConfig& cfg);

/// One KAN layer: every input-output edge carries a learnable univariate
/// function silu-base + cubic B-spline on a fixed uniform grid.
struct KanLayer {
    int d_in = 0, d_out = 0;
    int grid = 8, order = 3;
    double extent = 3.0;
    Tensor w_base;  // d_in x d_out
    Tensor coeffs;  // (d_in * (grid + order)) x d_out
    Tensor bias;    // d_out

    int basis_count() const { return grid + order; }
};

/// Evidence Enhancement Block: parallel 3x3 convs at dilations {1,2,4},
/// channel concat, 1x1 fuse, relu.
struct EebParams {
    Tensor w1, b1, w2, b2, w4, b4;  // branch convs
    Tensor wf, bf;                  // 1x1 fuse
};

struct NetParams {
    NetConfig cfg;
    EebParams enc1, enc2;
    KanLayer bottleneck;
    Tensor dec2_w, dec2_b;
    Tensor dec1_w, dec1_b;
    Tensor head_w, head_b;
    EugaWeights euga;

    static NetParams init(const NetConfig& cfg);

    /// All parameter tensors in declaration order (checkpoint order).
    std::vector<std::pair<std::string, Tensor*>> named();
    std::vector<std::pair<std::string, const Tensor*>> named() const;
    void watch_all(Tape& tape);
    long long param_count() const;
};

/// Cubic B-spline basis expansion: x (N x D) -> (N x D*K) with K basis
/// functions per input; zero outside the grid (base path only there).
Tensor spline_basis(Tape* tape, const Tensor& x, const KanLayer& layer);

/// Scalar basis evaluation for tests: fills B[0..K-1] (and dB when non-null).
void spline_basis_scalar(double x, const KanLayer& layer, double* B, double* dB);

/// out = silu(x) W_b + basis(x) C + bias.
Tensor kan_forward(Tape* tape, const Tensor& tokens, const KanLayer& layer);

Tensor eeb_forward(Tape* tape, const Tensor& x, const EebParams& p);

/// Full 3-stage encoder-decoder; umap (1 x H x W) guides the shallowest
/// skip through EUGA. H and W must be divisible by 4.
Tensor net_forward(Tape* tape, const Tensor& image, const Tensor& umap,
                   const NetParams& params);

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
struct Adam {
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long long step = 0;
    std::vector<std::vector<double>> m, v;

    void update(const std::vector<Tensor*>& params,
                const std::vector<const std::vector<double>*>& grads);
};

}  // namespace evseg
