#include "evseg/progressive.hpp"

#include <cmath>

namespace evseg {

double convergence_delta(const UncertaintyMap& prev, const UncertaintyMap& next) {
    if (prev.values.shape != next.values.shape)
        throw dim_error("convergence_delta: shape mismatch");
    double s = 0.0;
    for (int i = 0; i < prev.values.size(); ++i)
        s += std::abs(next.values.data[i] - prev.values.data[i]);
    return s / prev.values.size();
}

namespace {

UncertaintyMap ones_map(int h, int w) {
    return UncertaintyMap{Tensor::full({1, h, w}, 1.0), 0};
}

UncertaintyMap field_umap(Tape* tape, const EvidenceField& field, int iter) {
    const int h = field.uncertainty.shape[0], w = field.uncertainty.shape[1];
    UncertaintyMap m{reshape(tape, field.uncertainty, {1, h, w}), iter};
    for (int i = 0; i < m.values.size(); ++i) {
        if (!std::isfinite(m.values.data[i]))
            throw numeric_error("progressive: non-finite uncertainty at iteration " +
                                std::to_string(iter));
    }
    return m;
}

}  // namespace

ProgressiveResult progressive_segment(const Tensor& image,
                                      const NetParams& params,
                                      const ProgressiveConfig& cfg) {
    if (cfg.max_iters < 1 || cfg.epsilon <= 0)
        throw contract_error("progressive: invalid config");
    const int h = image.shape[1], w = image.shape[2];

    ProgressiveResult res;
    UncertaintyMap u = ones_map(h, w);
    EvidenceField field;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        Tensor logits = net_forward(nullptr, image, u.values, params);
        field = to_field(nullptr, evi_generate(nullptr, logits, cfg.generator));
        UncertaintyMap next = field_umap(nullptr, field, iter);
        const double delta = convergence_delta(u, next);
        res.trace.push_back({iter, delta});
        u = next;
        if (delta <= cfg.epsilon) break;
    }
    res.mask = predict_mask(field);
    res.umap = u;
    return res;
}

TrainStepResult train_step(NetParams& params, Adam& opt, const Tensor& image,
                           const GroundTruth& gt, int epoch,
                           const LossConfig& lcfg, const TrainOptions& opts) {
    const int h = image.shape[1], w = image.shape[2];

    Tape tape;
    params.watch_all(tape);

    Tensor guidance = Tensor::full({1, h, w}, 1.0);
    if (opts.unroll_iters) {
        for (int i = 1; i < opts.guidance_iters; ++i) {
            Tensor logits = net_forward(&tape, image, guidance, params);
            EvidenceField f = to_field(&tape, evi_generate(&tape, logits, opts.generator));
            guidance = reshape(&tape, f.uncertainty, {1, h, w});
        }
    } else {
        // Detached guidance: the fed-back map is data, only the final
        // forward is differentiated.
        for (int i = 1; i < opts.guidance_iters; ++i) {
            Tensor logits = net_forward(nullptr, image, guidance, params);
            EvidenceField f = to_field(nullptr, evi_generate(nullptr, logits, opts.generator));
            guidance = reshape(nullptr, f.uncertainty, {1, h, w});
            guidance.node = -1;
        }
    }

    Tensor logits = net_forward(&tape, image, guidance, params);
    EvidenceField field = to_field(&tape, evi_generate(&tape, logits, opts.generator));

    TrainStepResult out;
    Tensor ice = loss_ice(&tape, field, gt);
    out.ice = ice.item();
    Tensor total = ice;
    const double l1 = lambda1(epoch, lcfg);
    {
        Tensor kl = loss_kl(&tape, adjusted_alpha(&tape, field, gt));
        out.kl = kl.item();
        if (l1 != 0.0) total = add(&tape, total, affine(&tape, kl, l1, 0.0));
    }
    if (lcfg.use_loss_u) {
        Tensor lu = loss_u(&tape, field, gt, lcfg);
        out.lu = lu.item();
        if (lcfg.lambda2 != 0.0)
            total = add(&tape, total, affine(&tape, lu, lcfg.lambda2, 0.0));
    }
    out.total = total.item();

    tape.backward(total);
    std::vector<Tensor*> pts;
    std::vector<const std::vector<double>*> grads;
    for (auto& [name, t] : params.named()) {
        pts.push_back(t);
        grads.push_back(&tape.grad(*t));
    }
    opt.update(pts, grads);
    for (auto* t : pts) t->node = -1;  // tape is discarded with this frame
    return out;
}

}  // namespace evseg
