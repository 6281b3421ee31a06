#include <doctest.h>

#include <cmath>
#include <set>

#include "evseg/synth.hpp"

using namespace evseg;

TEST_CASE("samples are deterministic per seed and differ across seeds") {
    SegSample a = gen_blob_sample(42, 32, 32, 1.0);
    SegSample b = gen_blob_sample(42, 32, 32, 1.0);
    SegSample c = gen_blob_sample(43, 32, 32, 1.0);
    CHECK(a.image.data == b.image.data);
    CHECK(a.labels == b.labels);
    CHECK(a.image.data != c.image.data);
}

TEST_CASE("shapes and channel replication") {
    SegSample s = gen_blob_sample(7, 24, 40, 1.5);
    CHECK(s.image.shape == std::vector<int>{3, 24, 40});
    CHECK(s.mask_onehot.shape == std::vector<int>{2, 24, 40});
    CHECK(s.labels.size() == 24u * 40u);
    const int hw = 24 * 40;
    for (int i = 0; i < hw; ++i) {
        CHECK(s.image.data[i] == s.image.data[hw + i]);
        CHECK(s.image.data[i] == s.image.data[2 * hw + i]);
    }
}

TEST_CASE("one-hot mask matches labels") {
    SegSample s = gen_blob_sample(11, 32, 32, 1.0);
    const int hw = 32 * 32;
    for (int i = 0; i < hw; ++i) {
        int lab = s.labels[i];
        CHECK((lab == 0 || lab == 1));
        CHECK(s.mask_onehot.data[lab * hw + i] == 1.0);
        CHECK(s.mask_onehot.data[(1 - lab) * hw + i] == 0.0);
    }
}

TEST_CASE("blur_width = 0 gives a hard two-level image") {
    SegSample s = gen_blob_sample(3, 32, 32, 0.0);
    const int hw = 32 * 32;
    for (int i = 0; i < hw; ++i) {
        double v = s.image.data[i];
        double want = s.labels[i] == 1 ? 0.8 : 0.2;
        CHECK(v == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("blurred images stay between the two plateau levels") {
    SegSample s = gen_blob_sample(5, 32, 32, 2.0);
    for (double v : s.image.data) {
        CHECK(v >= 0.2 - 1e-9);
        CHECK(v <= 0.8 + 1e-9);
    }
}

TEST_CASE("foreground fraction stays within [0.05, 0.6] over many seeds") {
    for (unsigned long long seed = 0; seed < 1000; ++seed) {
        SegSample s = gen_blob_sample(seed, 16, 16, 1.0);
        int fg = 0;
        for (int lab : s.labels) fg += lab;
        double frac = static_cast<double>(fg) / s.labels.size();
        REQUIRE(frac >= 0.05);
        REQUIRE(frac <= 0.6);
    }
}

TEST_CASE("noise statistics match the requested sigma") {
    SegSample s = gen_blob_sample(21, 64, 64, 1.5);
    // Keep values away from the clamp boundaries so the deltas are the raw
    // Gaussian draws: shrink the image into [0.45, 0.55] first.
    SegSample mid = s;
    for (double& v : mid.image.data) v = 0.45 + 0.1 * (v - 0.2) / 0.6;
    NoiseSpec spec;
    spec.sigma = 0.1;
    spec.seed = 99;
    SegSample noisy = add_noise(mid, spec);
    CHECK(noisy.labels == mid.labels);
    CHECK(noisy.mask_onehot.data == mid.mask_onehot.data);

    const int n = mid.image.size();
    double sum = 0, sum_abs = 0, sum_sq = 0;
    for (int i = 0; i < n; ++i) {
        double d = noisy.image.data[i] - mid.image.data[i];
        sum += d;
        sum_abs += std::abs(d);
        sum_sq += d * d;
    }
    // Half-normal mean |d| = sigma * sqrt(2/pi); empirical sd near sigma.
    double mean_abs = sum_abs / n;
    double want_abs = 0.1 * std::sqrt(2.0 / M_PI);
    CHECK(mean_abs == doctest::Approx(want_abs).epsilon(0.10));
    double var = sum_sq / n - (sum / n) * (sum / n);
    CHECK(std::sqrt(var) == doctest::Approx(0.1).epsilon(0.05));
    CHECK(std::abs(sum / n) < 0.01);
}

TEST_CASE("noise output is clamped to [0,1] and deterministic per seed") {
    SegSample s = gen_blob_sample(27, 32, 32, 1.0);
    NoiseSpec spec;
    spec.sigma = 0.4;
    spec.seed = 5;
    SegSample a = add_noise(s, spec);
    SegSample b = add_noise(s, spec);
    CHECK(a.image.data == b.image.data);
    for (double v : a.image.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    spec.seed = 6;
    SegSample c = add_noise(s, spec);
    CHECK(a.image.data != c.image.data);
}

TEST_CASE("corpus splits are sized, disjoint by id, and seed-stable") {
    Corpus c = make_corpus(17, 8, 4, 4, 16, 16, 1.0);
    CHECK(c.train.size() == 8u);
    CHECK(c.val.size() == 4u);
    CHECK(c.test.size() == 4u);
    std::set<std::string> ids;
    for (const auto* split : {&c.train, &c.val, &c.test})
        for (const auto& s : *split) CHECK(ids.insert(s.id).second);
    CHECK(c.train[0].id == "train-0");
    CHECK(c.val[3].id == "val-3");

    Corpus again = make_corpus(17, 8, 4, 4, 16, 16, 1.0);
    CHECK(c.train[5].image.data == again.train[5].image.data);
    Corpus other = make_corpus(18, 8, 4, 4, 16, 16, 1.0);
    CHECK(c.train[5].image.data != other.train[5].image.data);

    // Different splits draw different content even at matching indices.
    CHECK(c.train[0].image.data != c.val[0].image.data);
}

TEST_CASE("tiny image dimension contract") {
    CHECK_THROWS_AS(gen_blob_sample(1, 8, 32, 1.0), contract_error);
    CHECK_THROWS_AS(gen_blob_sample(1, 32, 8, 1.0), contract_error);
}
