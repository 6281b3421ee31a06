#include <doctest.h>

#include <cmath>
#include <random>

#include "evseg/network.hpp"
#include "evseg/progressive.hpp"
#include "test_util.hpp"

using namespace evseg;
using testutil::random_tensor;

namespace {

NetConfig tiny_config(unsigned long long seed = 0) {
    NetConfig cfg;
    cfg.in_channels = 2;
    cfg.classes = 2;
    cfg.stage_channels = {2, 3, 4};
    cfg.kan_grid = 4;
    cfg.euga.rank = 2;
    cfg.euga.token_stride = 2;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("eeb_forward shapes and constructed cases") {
    std::mt19937_64 rng(1);
    SUBCASE("all-zero weights give a zero tensor of the right shape") {
        EebParams p;
        p.w1 = Tensor::zeros({3, 2, 3, 3});
        p.b1 = Tensor::zeros({3});
        p.w2 = Tensor::zeros({3, 2, 3, 3});
        p.b2 = Tensor::zeros({3});
        p.w4 = Tensor::zeros({3, 2, 3, 3});
        p.b4 = Tensor::zeros({3});
        p.wf = Tensor::zeros({3, 9, 1, 1});
        p.bf = Tensor::zeros({3});
        Tensor x = random_tensor(rng, {2, 8, 8});
        Tensor y = eeb_forward(nullptr, x, p);
        CHECK(y.shape == std::vector<int>{3, 8, 8});
        for (double v : y.data) CHECK(v == 0.0);
    }
    SUBCASE("identity dilation-1 branch with unit fuse reproduces relu(x)") {
        EebParams p;
        p.w1 = Tensor::zeros({1, 1, 3, 3});
        p.w1.data[4] = 1.0;  // center tap
        p.b1 = Tensor::zeros({1});
        p.w2 = Tensor::zeros({1, 1, 3, 3});
        p.b2 = Tensor::zeros({1});
        p.w4 = Tensor::zeros({1, 1, 3, 3});
        p.b4 = Tensor::zeros({1});
        p.wf = Tensor::zeros({1, 3, 1, 1});
        p.wf.data[0] = 1.0;  // pass branch 1 through
        p.bf = Tensor::zeros({1});
        Tensor x = random_tensor(rng, {1, 6, 6});
        Tensor y = eeb_forward(nullptr, x, p);
        Tensor expected = relu(nullptr, x);
        for (int i = 0; i < x.size(); ++i)
            CHECK(y.data[i] == doctest::Approx(expected.data[i]).epsilon(1e-15));
    }
}

TEST_CASE("eeb gradient check on random weights") {
    std::mt19937_64 rng(2);
    EebParams p;
    p.w1 = random_tensor(rng, {2, 1, 3, 3}, -0.5, 0.5);
    p.b1 = random_tensor(rng, {2}, -0.1, 0.1);
    p.w2 = random_tensor(rng, {2, 1, 3, 3}, -0.5, 0.5);
    p.b2 = random_tensor(rng, {2}, -0.1, 0.1);
    p.w4 = random_tensor(rng, {2, 1, 3, 3}, -0.5, 0.5);
    p.b4 = random_tensor(rng, {2}, -0.1, 0.1);
    p.wf = random_tensor(rng, {2, 6, 1, 1}, -0.5, 0.5);
    p.bf = random_tensor(rng, {2}, -0.1, 0.1);
    Tensor x = random_tensor(rng, {1, 10, 10});
    double err = finite_diff_check(
        [&](Tape& t, Tensor& w) {
            EebParams pt = p;
            pt.w2 = w;
            Tensor y = eeb_forward(&t, x, pt);
            return sum(&t, mul(&t, y, y));
        },
        p.w2, 1e-6);
    CHECK(err < 1e-5);
}

TEST_CASE("spline basis partition of unity inside the grid") {
    KanLayer l;
    l.d_in = 1;
    l.d_out = 1;
    l.grid = 8;
    l.order = 3;
    l.extent = 3.0;
    std::vector<double> b(l.basis_count());
    for (double x = -2.999; x < 3.0; x += 0.0137) {
        spline_basis_scalar(x, l, b.data(), nullptr);
        double s = 0.0;
        for (double v : b) s += v;
        CHECK(std::abs(s - 1.0) <= 1e-9);
    }
    // outside the grid, all basis functions vanish (base path only)
    spline_basis_scalar(4.0, l, b.data(), nullptr);
    for (double v : b) CHECK(v == 0.0);
}

TEST_CASE("kan layer with zero coefficients outputs zeros") {
    KanLayer l;
    l.d_in = 3;
    l.d_out = 2;
    l.grid = 4;
    l.order = 3;
    l.extent = 3.0;
    l.w_base = Tensor::zeros({3, 2});
    l.coeffs = Tensor::zeros({3 * l.basis_count(), 2});
    l.bias = Tensor::zeros({2});
    std::mt19937_64 rng(3);
    Tensor x = random_tensor(rng, {5, 3});
    Tensor y = kan_forward(nullptr, x, l);
    CHECK(y.shape == std::vector<int>{5, 2});
    for (double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("spline coefficients can interpolate f(x) = x on the grid") {
    KanLayer l;
    l.d_in = 1;
    l.d_out = 1;
    l.grid = 8;
    l.order = 3;
    l.extent = 3.0;
    l.w_base = Tensor::zeros({1, 1});
    l.bias = Tensor::zeros({1});
    // Cubic B-splines on a uniform grid reproduce linear functions when the
    // coefficients are the Greville abscissae.
    const double h = 2.0 * l.extent / l.grid;
    l.coeffs = Tensor::zeros({l.basis_count(), 1});
    for (int j = 0; j < l.basis_count(); ++j) {
        const double t1 = -l.extent + (j + 1 - l.order) * h;
        l.coeffs.data[j] = (t1 + (t1 + h) + (t1 + 2 * h)) / 3.0;
    }
    for (double x = -2.9; x < 2.9; x += 0.093) {
        Tensor in({1, 1}, {x});
        Tensor out = kan_forward(nullptr, in, l);
        CHECK(std::abs(out.data[0] - x) <= 1e-3);
    }
}

TEST_CASE("kan gradient matches finite differences in inputs and coefficients") {
    std::mt19937_64 rng(5);
    KanLayer l;
    l.d_in = 2;
    l.d_out = 3;
    l.grid = 4;
    l.order = 3;
    l.extent = 3.0;
    l.w_base = random_tensor(rng, {2, 3}, -0.5, 0.5);
    l.coeffs = random_tensor(rng, {2 * l.basis_count(), 3}, -0.5, 0.5);
    l.bias = random_tensor(rng, {3}, -0.1, 0.1);
    Tensor x = random_tensor(rng, {4, 2}, -2.0, 2.0);

    double err_x = finite_diff_check(
        [&](Tape& t, Tensor& v) {
            Tensor y = kan_forward(&t, v, l);
            return sum(&t, mul(&t, y, y));
        },
        x, 1e-6);
    CHECK(err_x < 1e-5);

    double err_c = finite_diff_check(
        [&](Tape& t, Tensor& c) {
            KanLayer lt = l;
            lt.coeffs = c;
            Tensor y = kan_forward(&t, x, lt);
            return sum(&t, mul(&t, y, y));
        },
        l.coeffs, 1e-6);
    CHECK(err_c < 1e-5);
}

TEST_CASE("net_forward smoke, shape, and determinism") {
    NetParams params = NetParams::init(tiny_config(9));
    std::mt19937_64 rng(7);
    Tensor image = random_tensor(rng, {2, 8, 8}, 0.0, 1.0);
    Tensor umap = Tensor::full({1, 8, 8}, 1.0);  // all-ones initialization
    Tensor l1 = net_forward(nullptr, image, umap, params);
    Tensor l2 = net_forward(nullptr, image, umap, params);
    CHECK(l1.shape == std::vector<int>{2, 8, 8});
    CHECK(l1.data == l2.data);  // bitwise

    NetParams again = NetParams::init(tiny_config(9));
    Tensor l3 = net_forward(nullptr, image, umap, again);
    CHECK(l1.data == l3.data);  // same seed, same weights
}

TEST_CASE("parameter count is a pure function of the config") {
    // Frozen for the default desk-scale config.
    NetParams def = NetParams::init(NetConfig{});
    CHECK(def.param_count() == 78594);
    CHECK(NetParams::init(NetConfig{}).param_count() == def.param_count());
}

TEST_CASE("every parameter receives a gradient on a random batch") {
    NetParams params = NetParams::init(tiny_config(11));
    std::mt19937_64 rng(13);
    Tensor image = random_tensor(rng, {2, 8, 8}, 0.0, 1.0);
    Tensor umap = random_tensor(rng, {1, 8, 8}, 0.1, 1.0);
    GroundTruth gt =
        GroundTruth::from_labels(testutil::random_labels(rng, 64, 2), 2, 8, 8);

    Tape tape;
    params.watch_all(tape);
    Tensor logits = net_forward(&tape, image, umap, params);
    EvidenceField f = to_field(&tape, evi_generate(&tape, logits));
    LossConfig lcfg;
    lcfg.total_epochs = 10;
    tape.backward(loss_total(&tape, f, gt, /*epoch=*/5, lcfg));
    for (auto& [name, t] : params.named()) {
        double mx = 0.0;
        for (double g : tape.grad(*t)) mx = std::max(mx, std::abs(g));
        INFO("parameter " << name);
        CHECK(mx > 0.0);
    }
}

TEST_CASE("end-to-end loss gradient matches finite differences on sampled weights") {
    NetParams params = NetParams::init(tiny_config(17));
    std::mt19937_64 rng(19);
    Tensor image = random_tensor(rng, {2, 8, 8}, 0.0, 1.0);
    GroundTruth gt =
        GroundTruth::from_labels(testutil::random_labels(rng, 64, 2), 2, 8, 8);
    LossConfig lcfg;
    lcfg.total_epochs = 10;
    Tensor umap = Tensor::full({1, 8, 8}, 1.0);

    auto loss_of = [&](NetParams& p, Tape* t) {
        Tensor logits = net_forward(t, image, umap, p);
        EvidenceField f = to_field(t, evi_generate(t, logits));
        return loss_total(t, f, gt, /*epoch=*/2, lcfg);
    };

    Tape tape;
    params.watch_all(tape);
    tape.backward(loss_of(params, &tape));

    // ~1% of parameters, sampled across all tensors.
    std::uniform_real_distribution<double> pick(0.0, 1.0);
    const double h = 1e-5;
    int checked = 0;
    for (auto& [name, t] : params.named()) {
        const auto& g = tape.grad(*t);
        for (int i = 0; i < t->size(); ++i) {
            if (pick(rng) > 0.02) continue;
            NetParams pp = params;
            auto plus = pp.named();
            // locate the same tensor/index in the copy
            Tensor* tp = nullptr;
            for (auto& [n2, t2] : plus)
                if (n2 == name) tp = t2;
            REQUIRE(tp != nullptr);
            const double orig = tp->data[i];
            tp->data[i] = orig + h;
            const double fp = loss_of(pp, nullptr).item();
            tp->data[i] = orig - h;
            const double fm = loss_of(pp, nullptr).item();
            const double fd = (fp - fm) / (2 * h);
            const double err = std::abs(g[i] - fd) / std::max(1.0, std::abs(g[i]));
            INFO(name << "[" << i << "]");
            CHECK(err < 1e-4);
            ++checked;
        }
    }
    CHECK(checked > 5);
}

TEST_CASE("skip wiring introspection follows use_euga") {
    NetConfig cfg = tiny_config();
    CHECK(skip_wiring(cfg) == SkipWiring::kEuga);
    cfg.use_euga = false;
    CHECK(skip_wiring(cfg) == SkipWiring::kPlain);
}

TEST_CASE("adam optimizer") {
    SUBCASE("zero gradients leave parameters and moments unchanged") {
        Adam opt;
        Tensor p({2}, {1.0, -2.0});
        std::vector<double> g(2, 0.0);
        opt.update({&p}, {&g});
        CHECK(p.data == std::vector<double>{1.0, -2.0});
        CHECK(opt.m[0] == std::vector<double>{0.0, 0.0});
        CHECK(opt.v[0] == std::vector<double>{0.0, 0.0});
    }
    SUBCASE("first step from zero state is ~ -lr * sign(g)") {
        Adam opt;
        opt.lr = 1e-3;
        Tensor p({2}, {0.0, 0.0});
        std::vector<double> g = {0.25, -3.0};
        opt.update({&p}, {&g});
        // bias-corrected first step: lr * g / (|g| + eps') ~ lr * sign(g)
        CHECK(p.data[0] == doctest::Approx(-1e-3).epsilon(1e-3));
        CHECK(p.data[1] == doctest::Approx(1e-3).epsilon(1e-3));
    }
    SUBCASE("constant gradient keeps |step| bounded by ~lr") {
        Adam opt;
        opt.lr = 1e-2;
        Tensor p({1}, {5.0});
        std::vector<double> g = {0.7};
        double prev = p.data[0];
        for (int i = 0; i < 200; ++i) {
            opt.update({&p}, {&g});
            const double step = prev - p.data[0];
            CHECK(step > 0.0);
            CHECK(step <= opt.lr * 1.01);
            prev = p.data[0];
        }
    }
}
