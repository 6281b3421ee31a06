#pragma once

#include "evseg/tensor.hpp"

namespace evseg {

struct EugaConfig {
    int rank = 8;
    int token_stride = 4;
    int feature_channels = 0;
};

/// 3x3 conv weights mapping the pooled uncertainty map (1 channel) to
/// `rank` channels for the query and key paths.
struct EugaWeights {
    Tensor wq, bq;  // rank x 1 x 3 x 3, rank
    Tensor wk, bk;
};

/// Uncertainty-guided low-rank attention with a residual connection:
///   u_tok = avgpool(umap, stride)
///   Q = reshape(convQ(u_tok))^T          (N_tok x r)
///   K = reshape(convK(u_tok))            (r x N_tok)
///   A = softmax_rows(Q K / sqrt(r))      (N_tok x N_tok, rank <= r scores)
///   V = reshape(avgpool(features, stride))
///   out = features + upsample(V A^T)
Tensor euga_forward(Tape* tape, const Tensor& features, const Tensor& umap,
                    const EugaWeights& w, const EugaConfig& cfg);

/// The attention matrix alone (for diagnostics and tests).
Tensor euga_attention(Tape* tape, const Tensor& umap, const EugaWeights& w,
                      const EugaConfig& cfg);

/// Mean row entropy of a row-stochastic matrix, in [0, ln N].
double attention_entropy(const Tensor& attn);

}  // namespace evseg
