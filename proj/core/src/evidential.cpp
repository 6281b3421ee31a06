#include "evseg/evidential.hpp"

#include <cmath>

namespace evseg {

namespace {

// Fused forward: expm1(-r) + r with r = relu(x) keeps the result
// nonnegative in floating point even for tiny positive x.
Tensor evi_smooth(Tape* tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape);
    const int n = out.size();
    for (int i = 0; i < n; ++i) {
        const double r = x.data[i] > 0 ? x.data[i] : 0.0;
        out.data[i] = std::expm1(-r) + r;
    }
    if (tape && x.traced()) {
        int idx = x.node;
        std::vector<double> xv = x.data;
        out.node = tape->add_node(
            [idx, xv, n](Tape& t, const std::vector<double>& g) {
                auto& gx = t.grad_buf(idx);
                for (int i = 0; i < n; ++i) {
                    if (xv[i] > 0) gx[i] += g[i] * (-std::expm1(-xv[i]));
                }
            },
            n);
    }
    return out;
}

}  // namespace

Tensor evi_generate(Tape* tape, const Tensor& logits, Generator gen) {
    if (gen == Generator::kExp) return exp(tape, clamp(tape, logits, -10.0, 10.0));
    return evi_smooth(tape, logits);
}

EvidenceField to_field(Tape* tape, const Tensor& evidence) {
    if (evidence.shape.size() != 3)
        throw dim_error("to_field: expected evidence C x H x W");
    for (double v : evidence.data)
        if (v < -1e-9) throw contract_error("to_field: negative evidence");

    EvidenceField f;
    f.classes = evidence.shape[0];
    f.evidence = evidence;
    f.alpha = affine(tape, evidence, 1.0, 1.0);
    f.strength = sum_channels(tape, f.alpha);
    f.uncertainty = div(
        tape, Tensor::full({evidence.shape[1], evidence.shape[2]},
                           static_cast<double>(f.classes)),
        f.strength);
    f.expected_prob =
        div(tape, f.alpha, broadcast_channels(tape, f.strength, f.classes));
    return f;
}

std::vector<int> predict_mask(const EvidenceField& field) {
    const int c = field.classes;
    const int hw = field.strength.size();
    std::vector<int> mask(hw, 0);
    for (int i = 0; i < hw; ++i) {
        int best = 0;
        double bv = field.expected_prob.data[i];
        for (int ch = 1; ch < c; ++ch) {
            const double v = field.expected_prob.data[ch * hw + i];
            if (v > bv) {
                bv = v;
                best = ch;
            }
        }
        mask[i] = best;
    }
    return mask;
}

}  // namespace evseg
