#include <doctest.h>

#include <cmath>
#include <random>

#include "evseg/evidential.hpp"
#include "test_util.hpp"

using namespace evseg;
using testutil::random_tensor;

TEST_CASE("evidence generator anchors") {
    Tensor x({4}, {0.0, -3.0, 1.0, 10.0});
    Tensor e = evi_generate(nullptr, x);
    CHECK(e.data[0] == 0.0);
    CHECK(e.data[1] == 0.0);
    CHECK(e.data[2] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(e.data[3] == doctest::Approx(std::exp(-10.0) + 9.0).epsilon(1e-12));
}

TEST_CASE("generator bounds: max(0, x-1) <= Evi(x) <= x for x >= 0") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(0.0, 20.0);
    for (int i = 0; i < 1000; ++i) {
        const double x = dist(rng);
        Tensor e = evi_generate(nullptr, Tensor::scalar(x));
        CHECK(e.data[0] >= std::max(0.0, x - 1.0));
        CHECK(e.data[0] <= x);
    }
}

TEST_CASE("generator is monotone and continuous at 0") {
    double prev = -1.0;
    for (double x = -2.0; x <= 2.0; x += 1e-3) {
        Tensor e = evi_generate(nullptr, Tensor::scalar(x));
        CHECK(e.data[0] >= prev);
        prev = e.data[0];
    }
    Tensor lo = evi_generate(nullptr, Tensor::scalar(-1e-12));
    Tensor hi = evi_generate(nullptr, Tensor::scalar(1e-12));
    CHECK(lo.data[0] == 0.0);
    CHECK(hi.data[0] < 1e-12);
}

TEST_CASE("generator derivative is 1 - e^{-x} on x > 0, 0 elsewhere") {
    Tape tape;
    Tensor x({3}, {-0.5, 0.0, 2.0});
    tape.watch(x);
    tape.backward(sum(&tape, evi_generate(&tape, x)));
    const auto& g = tape.grad(x);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);  // relu subgradient convention
    CHECK(g[2] == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("to_field invariant bundle") {
    SUBCASE("zero evidence prior") {
        EvidenceField f = to_field(nullptr, Tensor::zeros({2, 1, 1}));
        CHECK(f.alpha.data == std::vector<double>{1, 1});
        CHECK(f.strength.data[0] == 2.0);
        CHECK(f.uncertainty.data[0] == 1.0);
        CHECK(f.expected_prob.data[0] == 0.5);
        CHECK(f.expected_prob.data[1] == 0.5);
    }
    SUBCASE("e = (3,1)") {
        EvidenceField f = to_field(nullptr, Tensor({2, 1, 1}, {3, 1}));
        CHECK(f.alpha.data == std::vector<double>{4, 2});
        CHECK(f.strength.data[0] == 6.0);
        CHECK(f.uncertainty.data[0] == doctest::Approx(2.0 / 6.0).epsilon(1e-15));
        CHECK(f.expected_prob.data[0] == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
        CHECK(f.expected_prob.data[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-15));
    }
    SUBCASE("symmetric evidence stays 0.5 regardless of magnitude") {
        for (double k : {0.0, 1.0, 7.5, 100.0}) {
            EvidenceField f = to_field(nullptr, Tensor({2, 1, 1}, {k, k}));
            CHECK(f.expected_prob.data[0] == doctest::Approx(0.5).epsilon(1e-14));
            CHECK(f.uncertainty.data[0] ==
                  doctest::Approx(2.0 / (2.0 * k + 2.0)).epsilon(1e-14));
        }
    }
}

TEST_CASE("negative evidence is a contract error") {
    CHECK_THROWS_AS(to_field(nullptr, Tensor({2, 1, 1}, {-0.5, 1.0})),
                    contract_error);
}

TEST_CASE("predict_mask argmax and tie-break") {
    EvidenceField f = to_field(nullptr, Tensor({2, 1, 2}, {3, 1, 1, 3}));
    auto m = predict_mask(f);
    CHECK(m[0] == 0);
    CHECK(m[1] == 1);
    // exact tie breaks to the lowest class index
    EvidenceField tie = to_field(nullptr, Tensor({3, 1, 1}, {2, 2, 2}));
    CHECK(predict_mask(tie)[0] == 0);
}

TEST_CASE("evidential invariants on random logits") {
    std::mt19937_64 rng(13);
    const int classes = 3;
    for (int rep = 0; rep < 200; ++rep) {
        Tensor logits = random_tensor(rng, {classes, 2, 2}, -5.0, 5.0);
        Tensor e = evi_generate(nullptr, logits);
        EvidenceField f = to_field(nullptr, e);
        const int hw = 4;
        for (int i = 0; i < e.size(); ++i) {
            CHECK(e.data[i] >= 0.0);
            CHECK(f.alpha.data[i] == e.data[i] + 1.0);
        }
        for (int i = 0; i < hw; ++i) {
            double psum = 0.0;
            int amax_p = 0, amax_e = 0;
            for (int c = 0; c < classes; ++c) {
                psum += f.expected_prob.data[c * hw + i];
                if (f.expected_prob.data[c * hw + i] >
                    f.expected_prob.data[amax_p * hw + i])
                    amax_p = c;
                if (e.data[c * hw + i] > e.data[amax_e * hw + i]) amax_e = c;
            }
            CHECK(std::abs(psum - 1.0) <= 1e-12);
            CHECK(f.uncertainty.data[i] > 0.0);
            CHECK(f.uncertainty.data[i] <= 1.0);
            CHECK(amax_p == amax_e);
        }
    }
}

TEST_CASE("adding positive constant to a pixel's logits never increases u") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 100; ++rep) {
        Tensor logits = random_tensor(rng, {3, 1, 1}, -3.0, 3.0);
        Tensor shifted = affine(nullptr, logits, 1.0, 0.75);
        EvidenceField a = to_field(nullptr, evi_generate(nullptr, logits));
        EvidenceField b = to_field(nullptr, evi_generate(nullptr, shifted));
        CHECK(b.strength.data[0] >= a.strength.data[0]);
        CHECK(b.uncertainty.data[0] <= a.uncertainty.data[0]);
    }
}

TEST_CASE("to_field . evi_generate gradient matches finite differences") {
    std::mt19937_64 rng(19);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor logits = random_tensor(rng, {2, 3, 3}, -2.0, 2.0);
        double err = finite_diff_check(
            [](Tape& t, Tensor& x) {
                EvidenceField f = to_field(&t, evi_generate(&t, x));
                return sum(&t, mul(&t, f.expected_prob, f.expected_prob));
            },
            logits, 1e-6);
        CHECK(err < 1e-5);
    }
}
