#pragma once

#include <vector>

#include "evseg/tensor.hpp"

namespace evseg {

/// Evidence generator selection. `kEvi` is e^{-relu(x)} + relu(x) - 1;
/// `kExp` is the classic exp generator (logits clamped to [-10, 10]),
/// kept as an ablation baseline.
enum class Generator { kEvi, kExp };

/// Per-pixel evidence / Dirichlet bundle for a C-class image.
/// alpha = evidence + 1; S = sum_c alpha; u = C/S; p_hat = alpha/S.
struct EvidenceField {
    int classes = 0;
    Tensor evidence;       // C x H x W, >= 0
    Tensor alpha;          // C x H x W
    Tensor strength;       // H x W, >= C
    Tensor uncertainty;    // H x W, in (0, 1]
    Tensor expected_prob;  // C x H x W, channel sums == 1
};

/// Semantic-smooth generator: Evi(x) = e^{-relu(x)} + relu(x) - 1.
/// Zero for x <= 0, derivative 1 - e^{-x} on x > 0.
Tensor evi_generate(Tape* tape, const Tensor& logits,
                    Generator gen = Generator::kEvi);

/// Builds the Dirichlet bundle; stays on tape so losses differentiate
/// through it. Negative evidence (beyond -1e-9 float slack) is a contract
/// error, never a silent clamp.
EvidenceField to_field(Tape* tape, const Tensor& evidence);

/// Pixelwise argmax over expected probabilities; ties break to the lowest
/// class index. Returned as H x W of class indices.
std::vector<int> predict_mask(const EvidenceField& field);

}  // namespace evseg
