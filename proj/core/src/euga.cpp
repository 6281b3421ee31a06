#include "evseg/euga.hpp"

#include <cmath>

namespace evseg {

namespace {

void validate(const Tensor& features, const Tensor& umap,
              const EugaConfig& cfg) {
    if (features.shape.size() != 3 || umap.shape.size() != 3 ||
        umap.shape[0] != 1)
        throw dim_error("euga: expected features C x H x W, umap 1 x H x W");
    if (features.shape[1] != umap.shape[1] || features.shape[2] != umap.shape[2])
        throw dim_error("euga: feature/umap spatial mismatch");
    const int h = umap.shape[1], w = umap.shape[2];
    if (cfg.token_stride <= 0 || h % cfg.token_stride != 0 ||
        w % cfg.token_stride != 0)
        throw dim_error("euga: token_stride must divide H and W");
    const int n_tok = (h / cfg.token_stride) * (w / cfg.token_stride);
    if (cfg.rank <= 0 || cfg.rank > n_tok)
        throw dim_error("euga: rank must be in [1, N_tok]");
}

}  // namespace

Tensor euga_attention(Tape* tape, const Tensor& umap, const EugaWeights& w,
                      const EugaConfig& cfg) {
    const int h = umap.shape[1] / cfg.token_stride;
    const int wd = umap.shape[2] / cfg.token_stride;
    const int n_tok = h * wd;
    Tensor u_tok = avgpool(tape, umap, cfg.token_stride);
    Tensor q = reshape(tape, conv2d(tape, u_tok, w.wq, w.bq, 1), {cfg.rank, n_tok});
    Tensor k = reshape(tape, conv2d(tape, u_tok, w.wk, w.bk, 1), {cfg.rank, n_tok});
    Tensor scores = matmul(tape, transpose2d(tape, q), k);  // N_tok x N_tok
    scores = affine(tape, scores, 1.0 / std::sqrt(static_cast<double>(cfg.rank)), 0.0);
    return softmax_rows(tape, scores);
}

Tensor euga_forward(Tape* tape, const Tensor& features, const Tensor& umap,
                    const EugaWeights& w, const EugaConfig& cfg) {
    validate(features, umap, cfg);
    const int cf = features.shape[0];
    const int h = umap.shape[1] / cfg.token_stride;
    const int wd = umap.shape[2] / cfg.token_stride;
    const int n_tok = h * wd;

    Tensor attn = euga_attention(tape, umap, w, cfg);
    Tensor v = reshape(tape, avgpool(tape, features, cfg.token_stride), {cf, n_tok});
    Tensor weighted = matmul(tape, v, transpose2d(tape, attn));  // C_f x N_tok
    Tensor up = upsample_nearest(tape, reshape(tape, weighted, {cf, h, wd}),
                                 cfg.token_stride);
    return add(tape, features, up);
}

double attention_entropy(const Tensor& attn) {
    if (attn.shape.size() != 2) throw dim_error("attention_entropy: need 2D");
    const int m = attn.shape[0], n = attn.shape[1];
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        double he = 0.0;
        for (int j = 0; j < n; ++j) {
            const double p = attn.data[i * n + j];
            if (p > 0.0) he -= p * std::log(p);
        }
        total += he;
    }
    return total / m;
}

}  // namespace evseg
