#include "evseg/losses.hpp"

#include <algorithm>
#include <cmath>

#include "evseg/special.hpp"

namespace evseg {

GroundTruth GroundTruth::from_labels(const std::vector<int>& labels, int classes,
                                     int h, int w) {
    if (static_cast<int>(labels.size()) != h * w)
        throw dim_error("from_labels: label count mismatch");
    GroundTruth gt;
    gt.true_class = labels;
    gt.onehot = Tensor::zeros({classes, h, w});
    for (int i = 0; i < h * w; ++i) {
        const int c = labels[i];
        if (c < 0 || c >= classes)
            throw contract_error("from_labels: label out of range");
        gt.onehot.data[c * h * w + i] = 1.0;
    }
    return gt;
}

namespace {

void require_match(const EvidenceField& field, const GroundTruth& gt,
                   const char* op) {
    if (field.alpha.shape != gt.onehot.shape)
        throw dim_error(std::string(op) + ": field/gt shape mismatch");
}

Tensor pixel_mean(Tape* tape, const Tensor& t, int pixels) {
    return affine(tape, sum(tape, t), 1.0 / pixels, 0.0);
}

}  // namespace

Tensor loss_ice(Tape* tape, const EvidenceField& field, const GroundTruth& gt) {
    require_match(field, gt, "loss_ice");
    const int pixels = field.strength.size();
    Tensor log_s = broadcast_channels(tape, log(tape, field.strength), field.classes);
    Tensor term = mul(tape, gt.onehot, sub(tape, log_s, log(tape, field.alpha)));
    return pixel_mean(tape, term, pixels);
}

Tensor adjusted_alpha(Tape* tape, const EvidenceField& field,
                      const GroundTruth& gt) {
    require_match(field, gt, "adjusted_alpha");
    Tensor inv = Tensor::zeros(gt.onehot.shape);  // 1 - y, constant
    for (int i = 0; i < inv.size(); ++i) inv.data[i] = 1.0 - gt.onehot.data[i];
    return add(tape, gt.onehot, mul(tape, inv, field.alpha));
}

Tensor loss_kl(Tape* tape, const Tensor& alpha_tilde) {
    if (alpha_tilde.shape.size() != 3)
        throw dim_error("loss_kl: expected C x H x W");
    const int c = alpha_tilde.shape[0];
    const int pixels = alpha_tilde.shape[1] * alpha_tilde.shape[2];
    Tensor s = sum_channels(tape, alpha_tilde);
    Tensor dig = mul(tape, affine(tape, alpha_tilde, 1.0, -1.0),
                     sub(tape, digamma(tape, alpha_tilde),
                         broadcast_channels(tape, digamma(tape, s), c)));
    Tensor per_pixel =
        add(tape,
            sub(tape, lgamma(tape, s), sum_channels(tape, lgamma(tape, alpha_tilde))),
            sum_channels(tape, dig));
    per_pixel = affine(tape, per_pixel, 1.0, -lgamma(static_cast<double>(c)));
    return pixel_mean(tape, per_pixel, pixels);
}

Tensor loss_u(Tape* tape, const EvidenceField& field, const GroundTruth& gt,
              const LossConfig& cfg) {
    require_match(field, gt, "loss_u");
    const int pixels = field.strength.size();
    Tensor p_gt = sum_channels(tape, mul(tape, gt.onehot, field.expected_prob));
    Tensor ln_u =
        log(tape, clamp_min(tape, field.uncertainty, cfg.eps_log));
    Tensor weight = affine(tape, p_gt, -1.0, 1.0);  // 1 - p_hat^gt
    if (!cfg.literal_u_sign) ln_u = affine(tape, ln_u, -1.0, 0.0);
    return pixel_mean(tape, mul(tape, weight, ln_u), pixels);
}

double lambda1(int epoch, const LossConfig& cfg) {
    if (epoch < 0) throw contract_error("lambda1: epoch must be >= 0");
    return std::min(1.0, epoch * cfg.kl_anneal_factor / cfg.total_epochs);
}

Tensor loss_total(Tape* tape, const EvidenceField& field, const GroundTruth& gt,
                  int epoch, const LossConfig& cfg) {
    Tensor total = loss_ice(tape, field, gt);
    const double l1 = lambda1(epoch, cfg);
    if (l1 != 0.0) {
        Tensor kl = loss_kl(tape, adjusted_alpha(tape, field, gt));
        total = add(tape, total, affine(tape, kl, l1, 0.0));
    }
    if (cfg.use_loss_u && cfg.lambda2 != 0.0) {
        Tensor lu = loss_u(tape, field, gt, cfg);
        total = add(tape, total, affine(tape, lu, cfg.lambda2, 0.0));
    }
    return total;
}

}  // namespace evseg
