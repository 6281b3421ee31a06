#include "evseg/network.hpp"

#include <cmath>
#include <random>

namespace evseg {

SkipWiring skip_wiring(const NetConfig& cfg) {
    return cfg.use_euga ? SkipWiring::kEuga : SkipWiring::kPlain;
}

// ---- init ------------------------------------------------------------------

namespace {

Tensor kaiming_conv(std::mt19937_64& rng, int co, int ci, int k) {
    const double bound = std::sqrt(6.0 / (ci * k * k));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor w = Tensor::zeros({co, ci, k, k});
    for (double& v : w.data) v = dist(rng);
    return w;
}

EebParams init_eeb(std::mt19937_64& rng, int ci, int co) {
    EebParams p;
    p.w1 = kaiming_conv(rng, co, ci, 3);
    p.b1 = Tensor::zeros({co});
    p.w2 = kaiming_conv(rng, co, ci, 3);
    p.b2 = Tensor::zeros({co});
    p.w4 = kaiming_conv(rng, co, ci, 3);
    p.b4 = Tensor::zeros({co});
    p.wf = kaiming_conv(rng, co, 3 * co, 1);
    p.bf = Tensor::zeros({co});
    return p;
}

KanLayer init_kan(std::mt19937_64& rng, int d_in, int d_out, int grid,
                  int order, double extent) {
    KanLayer l;
    l.d_in = d_in;
    l.d_out = d_out;
    l.grid = grid;
    l.order = order;
    l.extent = extent;
    const double bound = std::sqrt(6.0 / d_in);
    std::uniform_real_distribution<double> base(-bound, bound);
    l.w_base = Tensor::zeros({d_in, d_out});
    for (double& v : l.w_base.data) v = base(rng);
    std::normal_distribution<double> coef(0.0, 0.1);
    l.coeffs = Tensor::zeros({d_in * l.basis_count(), d_out});
    for (double& v : l.coeffs.data) v = coef(rng);
    l.bias = Tensor::zeros({d_out});
    return l;
}

}  // namespace

NetParams NetParams::init(const NetConfig& cfg) {
    if (cfg.stage_channels.size() != 3)
        throw contract_error("NetConfig: exactly 3 stage channels expected");
    if (cfg.classes < 2) throw contract_error("NetConfig: classes must be >= 2");
    std::mt19937_64 rng(cfg.seed);
    const int c1 = cfg.stage_channels[0], c2 = cfg.stage_channels[1],
              c3 = cfg.stage_channels[2];

    NetParams p;
    p.cfg = cfg;
    p.cfg.euga.feature_channels = c1;
    p.enc1 = init_eeb(rng, cfg.in_channels, c1);
    p.enc2 = init_eeb(rng, c1, c2);
    p.bottleneck = init_kan(rng, c2, c3, cfg.kan_grid, cfg.kan_spline_order,
                            cfg.kan_grid_extent);
    p.dec2_w = kaiming_conv(rng, c2, c3 + c2, 3);
    p.dec2_b = Tensor::zeros({c2});
    p.dec1_w = kaiming_conv(rng, c1, c2 + c1, 3);
    p.dec1_b = Tensor::zeros({c1});
    p.head_w = kaiming_conv(rng, cfg.classes, c1, 1);
    p.head_b = Tensor::zeros({cfg.classes});
    p.euga.wq = kaiming_conv(rng, cfg.euga.rank, 1, 3);
    p.euga.bq = Tensor::zeros({cfg.euga.rank});
    p.euga.wk = kaiming_conv(rng, cfg.euga.rank, 1, 3);
    p.euga.bk = Tensor::zeros({cfg.euga.rank});
    return p;
}

std::vector<std::pair<std::string, Tensor*>> NetParams::named() {
    return {
        {"enc1.w1", &enc1.w1}, {"enc1.b1", &enc1.b1}, {"enc1.w2", &enc1.w2},
        {"enc1.b2", &enc1.b2}, {"enc1.w4", &enc1.w4}, {"enc1.b4", &enc1.b4},
        {"enc1.wf", &enc1.wf}, {"enc1.bf", &enc1.bf},
        {"enc2.w1", &enc2.w1}, {"enc2.b1", &enc2.b1}, {"enc2.w2", &enc2.w2},
        {"enc2.b2", &enc2.b2}, {"enc2.w4", &enc2.w4}, {"enc2.b4", &enc2.b4},
        {"enc2.wf", &enc2.wf}, {"enc2.bf", &enc2.bf},
        {"kan.w_base", &bottleneck.w_base},
        {"kan.coeffs", &bottleneck.coeffs},
        {"kan.bias", &bottleneck.bias},
        {"dec2.w", &dec2_w}, {"dec2.b", &dec2_b},
        {"dec1.w", &dec1_w}, {"dec1.b", &dec1_b},
        {"head.w", &head_w}, {"head.b", &head_b},
        {"euga.wq", &euga.wq}, {"euga.bq", &euga.bq},
        {"euga.wk", &euga.wk}, {"euga.bk", &euga.bk},
    };
}

std::vector<std::pair<std::string, const Tensor*>> NetParams::named() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (auto& [name, t] : const_cast<NetParams*>(this)->named())
        out.emplace_back(name, t);
    return out;
}

void NetParams::watch_all(Tape& tape) {
    for (auto& [name, t] : named()) tape.watch(*t);
}

long long NetParams::param_count() const {
    long long n = 0;
    for (auto& [name, t] : named()) n += t->size();
    return n;
}

// ---- spline basis ----------------------------------------------------------

void spline_basis_scalar(double x, const KanLayer& layer, double* B,
                         double* dB) {
    const int k = layer.order;
    const int K = layer.basis_count();
    const double h = 2.0 * layer.extent / layer.grid;
    const int n0 = layer.grid + 2 * k;  // degree-0 functions
    // knot j (j = 0 .. grid + 2k) sits at -extent + (j - k) * h
    auto knot = [&](int j) { return -layer.extent + (j - k) * h; };

    for (int j = 0; j < K; ++j) {
        B[j] = 0.0;
        if (dB) dB[j] = 0.0;
    }
    if (x < -layer.extent || x >= layer.extent) return;

    std::vector<double> n(n0, 0.0);
    for (int j = 0; j < n0; ++j)
        n[j] = (x >= knot(j) && x < knot(j + 1)) ? 1.0 : 0.0;
    std::vector<double> prev;
    for (int d = 1; d <= k; ++d) {
        if (d == k) prev = n;  // degree k-1 values, needed for derivatives
        for (int j = 0; j < n0 - d; ++j) {
            const double left = (x - knot(j)) / (d * h) * n[j];
            const double right = (knot(j + d + 1) - x) / (d * h) * n[j + 1];
            n[j] = left + right;
        }
    }
    for (int j = 0; j < K; ++j) {
        B[j] = n[j];
        if (dB) dB[j] = (prev[j] - prev[j + 1]) / h;
    }
}

Tensor spline_basis(Tape* tape, const Tensor& x, const KanLayer& layer) {
    if (x.shape.size() != 2 || x.shape[1] != layer.d_in)
        throw dim_error("spline_basis: expected tokens N x d_in");
    const int rows = x.shape[0], d = x.shape[1];
    const int K = layer.basis_count();
    Tensor out = Tensor::zeros({rows, d * K});
    std::vector<double> deriv(static_cast<size_t>(rows) * d * K, 0.0);
    std::vector<double> b(K), db(K);
    for (int i = 0; i < rows * d; ++i) {
        spline_basis_scalar(x.data[i], layer, b.data(), db.data());
        for (int j = 0; j < K; ++j) {
            out.data[i * K + j] = b[j];
            deriv[static_cast<size_t>(i) * K + j] = db[j];
        }
    }
    if (tape && x.traced()) {
        int idx = x.node;
        const int n = rows * d;
        out.node = tape->add_node(
            [idx, deriv = std::move(deriv), n, K](Tape& t,
                                                  const std::vector<double>& g) {
                auto& gx = t.grad_buf(idx);
                for (int i = 0; i < n; ++i) {
                    double s = 0.0;
                    for (int j = 0; j < K; ++j)
                        s += g[i * K + j] * deriv[static_cast<size_t>(i) * K + j];
                    gx[i] += s;
                }
            },
            rows * d * K);
    }
    return out;
}

Tensor kan_forward(Tape* tape, const Tensor& tokens, const KanLayer& layer) {
    if (tokens.shape.size() != 2 || tokens.shape[1] != layer.d_in)
        throw dim_error("kan_forward: expected tokens N x d_in");
    const int rows = tokens.shape[0];
    Tensor base = matmul(tape, silu(tape, tokens), layer.w_base);
    Tensor spline = matmul(tape, spline_basis(tape, tokens, layer), layer.coeffs);
    Tensor bias_rows = matmul(tape, Tensor::full({rows, 1}, 1.0),
                              reshape(tape, layer.bias, {1, layer.d_out}));
    return add(tape, add(tape, base, spline), bias_rows);
}

// ---- blocks ----------------------------------------------------------------

Tensor eeb_forward(Tape* tape, const Tensor& x, const EebParams& p) {
    Tensor b1 = conv2d(tape, x, p.w1, p.b1, 1, 1);
    Tensor b2 = conv2d(tape, x, p.w2, p.b2, 2, 2);
    Tensor b4 = conv2d(tape, x, p.w4, p.b4, 4, 4);
    Tensor cat = concat_channels(tape, concat_channels(tape, b1, b2), b4);
    return relu(tape, conv2d(tape, cat, p.wf, p.bf, 0));
}

Tensor net_forward(Tape* tape, const Tensor& image, const Tensor& umap,
                   const NetParams& params) {
    const NetConfig& cfg = params.cfg;
    if (image.shape.size() != 3 || image.shape[0] != cfg.in_channels)
        throw dim_error("net_forward: image channel mismatch");
    const int h = image.shape[1], w = image.shape[2];
    if (h % 4 != 0 || w % 4 != 0)
        throw dim_error("net_forward: H and W must be divisible by 4");
    const int c2 = cfg.stage_channels[1], c3 = cfg.stage_channels[2];

    Tensor s1 = eeb_forward(tape, image, params.enc1);       // c1 x H x W
    Tensor p1 = avgpool(tape, s1, 2);
    Tensor s2 = eeb_forward(tape, p1, params.enc2);          // c2 x H/2 x W/2
    Tensor p2 = avgpool(tape, s2, 2);                        // c2 x H/4 x W/4

    const int n_tok = (h / 4) * (w / 4);
    Tensor tokens = transpose2d(tape, reshape(tape, p2, {c2, n_tok}));
    Tensor bott = kan_forward(tape, tokens, params.bottleneck);  // N x c3
    bott = reshape(tape, transpose2d(tape, bott), {c3, h / 4, w / 4});

    Tensor d2 = relu(tape, conv2d(tape,
                                  concat_channels(tape, upsample_nearest(tape, bott, 2), s2),
                                  params.dec2_w, params.dec2_b, 1));
    Tensor skip1 = cfg.use_euga
                       ? euga_forward(tape, s1, umap, params.euga, params.cfg.euga)
                       : s1;
    Tensor d1 = relu(tape, conv2d(tape,
                                  concat_channels(tape, upsample_nearest(tape, d2, 2), skip1),
                                  params.dec1_w, params.dec1_b, 1));
    return conv2d(tape, d1, params.head_w, params.head_b, 0);
}

// ---- optimizer --------------------------------------------------------------

void Adam::update(const std::vector<Tensor*>& params,
                  const std::vector<const std::vector<double>*>& grads) {
    if (params.size() != grads.size())
        throw contract_error("Adam: params/grads count mismatch");
    if (m.empty()) {
        m.resize(params.size());
        v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            m[i].assign(params[i]->data.size(), 0.0);
            v[i].assign(params[i]->data.size(), 0.0);
        }
    }
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i]->data;
        const auto& g = *grads[i];
        if (g.size() != p.size()) throw contract_error("Adam: grad size mismatch");
        for (size_t j = 0; j < p.size(); ++j) {
            m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g[j];
            v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g[j] * g[j];
            const double mh = m[i][j] / bc1;
            const double vh = v[i][j] / bc2;
            p[j] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

}  // namespace evseg
