#pragma once

#include <vector>

#include "evseg/losses.hpp"
#include "evseg/network.hpp"

namespace evseg {

struct UncertaintyMap {
    Tensor values;      // 1 x H x W, (0,1]; iteration 0 is exactly all-ones
    int iteration = 0;
};

struct ProgressiveConfig {
    double epsilon = 0.01;
    int max_iters = 5;
    Generator generator = Generator::kEvi;
};

struct IterationDelta {
    int iteration;
    double delta;
};

struct ProgressiveResult {
    std::vector<int> mask;  // H x W argmax labels of the final iteration
    UncertaintyMap umap;
    std::vector<IterationDelta> trace;
};

/// Mean absolute elementwise difference between two maps.
double convergence_delta(const UncertaintyMap& prev, const UncertaintyMap& next);

/// The progressive guided loop: start from the all-ones map, rerun the
/// network with each iteration's uncertainty as guidance, stop when the
/// mean delta drops to epsilon or max_iters is reached.
ProgressiveResult progressive_segment(const Tensor& image,
                                      const NetParams& params,
                                      const ProgressiveConfig& cfg);

struct TrainOptions {
    int guidance_iters = 2;  // fixed count at training time
    bool unroll_iters = false;
    Generator generator = Generator::kEvi;
};

struct TrainStepResult {
    double total = 0, ice = 0, kl = 0, lu = 0;
};

/// One Adam step on a single image. Guidance iterations before the last are
/// detached (the fed-back map is data); only the final forward is
/// backpropagated unless unroll_iters keeps the loop on tape.
TrainStepResult train_step(NetParams& params, Adam& opt, const Tensor& image,
                           const GroundTruth& gt, int epoch,
                           const LossConfig& lcfg, const TrainOptions& opts);

}  // namespace evseg
