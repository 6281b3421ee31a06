#include "evseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace evseg {

namespace {

constexpr double kForeground = 0.8;
constexpr double kBackground = 0.2;

std::vector<uint8_t> draw_blobs(std::mt19937_64& rng, int h, int w) {
    std::uniform_int_distribution<int> count_dist(1, 3);
    std::uniform_real_distribution<double> pos(0.22, 0.78);
    std::uniform_real_distribution<double> size(0.13, 0.22);
    const int k = count_dist(rng);
    const double scale = std::min(h, w);
    std::vector<double> cy(k), cx(k), sg(k);
    for (int i = 0; i < k; ++i) {
        cy[i] = pos(rng) * h;
        cx[i] = pos(rng) * w;
        sg[i] = size(rng) * scale;
    }
    std::vector<uint8_t> mask(static_cast<size_t>(h) * w, 0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double g = 0.0;
            for (int i = 0; i < k; ++i) {
                const double dy = r - cy[i], dx = c - cx[i];
                g += std::exp(-(dy * dy + dx * dx) / (2.0 * sg[i] * sg[i]));
            }
            mask[r * w + c] = g >= 0.5 ? 1 : 0;
        }
    return mask;
}

// Separable Gaussian blur with reflected boundaries.
std::vector<double> gaussian_blur(const std::vector<double>& img, int h, int w,
                                  double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double ks = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        ks += kernel[i + radius];
    }
    for (double& v : kernel) v /= ks;
    auto reflect = [](int i, int n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
        return i;
    };
    std::vector<double> tmp(img.size()), out(img.size());
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i)
                s += kernel[i + radius] * img[r * w + reflect(c + i, w)];
            tmp[r * w + c] = s;
        }
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i)
                s += kernel[i + radius] * tmp[reflect(r + i, h) * w + c];
            out[r * w + c] = s;
        }
    return out;
}

unsigned long long mix_seed(unsigned long long seed, unsigned long long index) {
    // splitmix64 finalizer
    unsigned long long z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

SegSample gen_blob_sample(unsigned long long seed, int h, int w,
                          double blur_width) {
    if (h < 16 || w < 16) throw contract_error("gen_blob_sample: H, W must be >= 16");
    std::mt19937_64 rng(seed);
    std::vector<uint8_t> mask;
    for (int attempt = 0; attempt < 20; ++attempt) {
        mask = draw_blobs(rng, h, w);
        long long fg = 0;
        for (uint8_t m : mask) fg += m;
        const double frac = fg / static_cast<double>(h * w);
        if (frac >= 0.05 && frac <= 0.6) break;
    }

    std::vector<double> intensity(mask.size());
    for (size_t i = 0; i < mask.size(); ++i)
        intensity[i] = mask[i] ? kForeground : kBackground;
    intensity = gaussian_blur(intensity, h, w, blur_width);

    SegSample s;
    s.blur_width = blur_width;
    s.labels.assign(mask.begin(), mask.end());
    s.image = Tensor::zeros({3, h, w});
    for (int ch = 0; ch < 3; ++ch)
        std::copy(intensity.begin(), intensity.end(),
                  s.image.data.begin() + static_cast<size_t>(ch) * h * w);
    s.mask_onehot = Tensor::zeros({2, h, w});
    for (int i = 0; i < h * w; ++i)
        s.mask_onehot.data[s.labels[i] * h * w + i] = 1.0;
    return s;
}

SegSample add_noise(const SegSample& sample, const NoiseSpec& spec) {
    SegSample out = sample;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(spec.mean, spec.sigma);
    for (double& v : out.image.data)
        v = std::clamp(v + noise(rng), 0.0, 1.0);
    return out;
}

Corpus make_corpus(unsigned long long seed, int n_train, int n_val, int n_test,
                   int h, int w, double blur_width) {
    Corpus c;
    int index = 0;
    auto fill = [&](std::vector<SegSample>& dst, int count, const char* split) {
        for (int i = 0; i < count; ++i, ++index) {
            SegSample s = gen_blob_sample(mix_seed(seed, index), h, w, blur_width);
            s.id = std::string(split) + "-" + std::to_string(i);
            dst.push_back(std::move(s));
        }
    };
    fill(c.train, n_train, "train");
    fill(c.val, n_val, "val");
    fill(c.test, n_test, "test");
    return c;
}

}  // namespace evseg
