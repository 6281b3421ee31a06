#pragma once

#include <vector>

#include "evseg/evidential.hpp"
#include "evseg/tensor.hpp"

namespace evseg {

struct LossConfig {
    double lambda2 = 0.5;
    int total_epochs = 1;
    double kl_anneal_factor = 10.0;
    double eps_log = 1e-12;
    // Reproduces the literal printed sign of the uncertainty regularizer
    // (see loss_u); off by default, the corrected sign is used.
    bool literal_u_sign = false;
    // Drops the uncertainty term entirely (ablation baseline).
    bool use_loss_u = true;
};

struct GroundTruth {
    Tensor onehot;                // C x H x W, entries in {0,1}, channel sums 1
    std::vector<int> true_class;  // H x W per-pixel class index

    static GroundTruth from_labels(const std::vector<int>& labels, int classes,
                                   int h, int w);
};

/// Integrated cross-entropy: mean over pixels of sum_c y_c (ln S - ln alpha_c).
Tensor loss_ice(Tape* tape, const EvidenceField& field, const GroundTruth& gt);

/// alpha~ = y + (1 - y) * alpha: the true-class entry is forced to 1 and
/// carries no gradient; other entries keep alpha.
Tensor adjusted_alpha(Tape* tape, const EvidenceField& field,
                      const GroundTruth& gt);

/// KL(Dir(alpha~) || Dir(1,...,1)), mean over pixels.
Tensor loss_kl(Tape* tape, const Tensor& alpha_tilde);

/// Fidelity-enhancing term: mean of -(1 - p_hat^gt) ln(u), sign-corrected so
/// the minimum (0) sits at u = 1 or p_hat^gt = 1. With literal_u_sign the
/// printed-formula sign is used instead.
Tensor loss_u(Tape* tape, const EvidenceField& field, const GroundTruth& gt,
              const LossConfig& cfg);

/// KL annealing weight: min(1, epoch * kl_anneal_factor / total_epochs).
double lambda1(int epoch, const LossConfig& cfg);

/// L_ice + lambda1 * L_KL + lambda2 * L_u.
Tensor loss_total(Tape* tape, const EvidenceField& field, const GroundTruth& gt,
                  int epoch, const LossConfig& cfg);

}  // namespace evseg
