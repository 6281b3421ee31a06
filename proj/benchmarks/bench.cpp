#include <benchmark/benchmark.h>

#include <random>

#include "evseg/metrics.hpp"
#include "evseg/progressive.hpp"
#include "evseg/synth.hpp"

using namespace evseg;

namespace {

NetParams default_params() {
    NetConfig cfg;
    cfg.seed = 1;
    return NetParams::init(cfg);
}

void BM_NetForward(benchmark::State& state) {
    NetParams p = default_params();
    SegSample s = gen_blob_sample(3, 64, 64, 1.5);
    Tensor u = Tensor::full({1, 64, 64}, 1.0);
    for (auto _ : state) {
        Tensor out = net_forward(nullptr, s.image, u, p);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_NetForward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    NetParams p = default_params();
    SegSample s = gen_blob_sample(3, 64, 64, 1.5);
    GroundTruth gt = GroundTruth::from_labels(s.labels, 2, 64, 64);
    LossConfig lc;
    lc.total_epochs = 30;
    TrainOptions to;
    Adam opt;
    for (auto _ : state) {
        auto r = train_step(p, opt, s.image, gt, 1, lc, to);
        benchmark::DoNotOptimize(r.total);
    }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_ProgressiveSegment(benchmark::State& state) {
    NetParams p = default_params();
    SegSample s = gen_blob_sample(5, 64, 64, 1.5);
    ProgressiveConfig pc;
    for (auto _ : state) {
        auto res = progressive_segment(s.image, p, pc);
        benchmark::DoNotOptimize(res.mask.data());
    }
}
BENCHMARK(BM_ProgressiveSegment)->Unit(benchmark::kMillisecond);

void BM_EugaForward(benchmark::State& state) {
    NetConfig cfg;
    cfg.seed = 1;
    NetParams p = NetParams::init(cfg);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Tensor feat = Tensor::zeros({16, 64, 64});
    Tensor umap = Tensor::zeros({1, 64, 64});
    for (double& v : feat.data) v = unit(rng);
    for (double& v : umap.data) v = unit(rng);
    EugaConfig ecfg = cfg.euga;
    ecfg.feature_channels = 16;
    for (auto _ : state) {
        Tensor out = euga_forward(nullptr, feat, umap, p.euga, ecfg);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_EugaForward)->Unit(benchmark::kMillisecond);

void BM_Assd(benchmark::State& state) {
    SegSample a = gen_blob_sample(7, 64, 64, 0.0);
    SegSample b = gen_blob_sample(8, 64, 64, 0.0);
    BinaryMask ma = BinaryMask::from_labels(a.labels, 64, 64);
    BinaryMask mb = BinaryMask::from_labels(b.labels, 64, 64);
    for (auto _ : state) {
        double d = assd(ma, mb);
        benchmark::DoNotOptimize(d);
    }
}
BENCHMARK(BM_Assd);

}  // namespace

BENCHMARK_MAIN();
