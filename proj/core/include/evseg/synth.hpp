#pragma once

#include <string>
#include <vector>

#include "evseg/tensor.hpp"

namespace evseg {

/// Image + one-hot ground truth pair. The synthetic content is gray,
/// replicated to 3 channels to match the network's input contract.
struct SegSample {
    Tensor image;             // 3 x H x W in [0,1] (before noise)
    Tensor mask_onehot;       // C x H x W
    std::vector<int> labels;  // H x W class indices
    std::string id;
    double blur_width = 0.0;
};

struct NoiseSpec {
    double mean = 0.0;
    double sigma = 0.1;  // protocol range [0.1, 0.4]
    unsigned long long seed = 0;
};

/// 1-3 smooth random blobs (thresholded sums of Gaussians) as foreground;
/// the rendered intensity step is blurred by `blur_width` so the true edge
/// is ambiguous. Deterministic per seed; foreground fraction kept within
/// [0.05, 0.6] by redrawing from the same stream.
SegSample gen_blob_sample(unsigned long long seed, int h, int w,
                          double blur_width);

/// image' = clamp(image + N(mean, sigma^2), 0, 1); the mask is untouched.
SegSample add_noise(const SegSample& sample, const NoiseSpec& spec);

struct Corpus {
    std::vector<SegSample> train, val, test;
};

/// Seed-stable corpus with disjoint ids across the three splits.
Corpus make_corpus(unsigned long long seed, int n_train, int n_val, int n_test,
                   int h, int w, double blur_width);

}  // namespace evseg
