// evseg: train / eval / predict / ablate / synth / check

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "evseg/io.hpp"
#include "evseg/metrics.hpp"
#include "evseg/progressive.hpp"
#include "evseg/synth.hpp"

namespace fs = std::filesystem;
using namespace evseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitArtifact = 4;

struct RunConfig {
    NetConfig net;
    LossConfig loss;
    ProgressiveConfig prog;
    TrainOptions train_opts;
    int epochs = 30;
    double lr = 1e-4;
    int n_train = 64, n_val = 8, n_test = 8;
    int height = 64, width = 64;
    double blur_width = 1.5;
    double noise_sigma = 0.0;
    bool sael = true;
    std::string out_dir = "out";
    std::string data_dir;
};

void merge_config_file(RunConfig& rc, const std::string& path) {
    const auto m = read_config_file(path);
    rc.net.in_channels = cfg_int(m, "net.in_channels", rc.net.in_channels);
    rc.net.classes = cfg_int(m, "net.classes", rc.net.classes);
    rc.net.kan_grid = cfg_int(m, "net.kan_grid", rc.net.kan_grid);
    rc.net.kan_spline_order =
        cfg_int(m, "net.kan_spline_order", rc.net.kan_spline_order);
    rc.net.kan_grid_extent =
        cfg_double(m, "net.kan_grid_extent", rc.net.kan_grid_extent);
    rc.net.use_euga = cfg_bool(m, "net.use_euga", rc.net.use_euga);
    rc.net.seed = static_cast<unsigned long long>(std::strtoull(
        cfg_str(m, "net.seed", std::to_string(rc.net.seed)).c_str(), nullptr, 10));
    if (auto it = m.find("net.stage_channels"); it != m.end()) {
        std::istringstream ss(it->second);
        rc.net.stage_channels.clear();
        std::string tok;
        while (std::getline(ss, tok, ','))
            rc.net.stage_channels.push_back(std::stoi(tok));
    }
    rc.net.euga.rank = cfg_int(m, "euga.rank", rc.net.euga.rank);
    rc.net.euga.token_stride =
        cfg_int(m, "euga.token_stride", rc.net.euga.token_stride);

    rc.loss.lambda2 = cfg_double(m, "loss.lambda2", rc.loss.lambda2);
    rc.loss.kl_anneal_factor =
        cfg_double(m, "loss.kl_anneal_factor", rc.loss.kl_anneal_factor);
    rc.loss.eps_log = cfg_double(m, "loss.eps_log", rc.loss.eps_log);
    rc.loss.literal_u_sign =
        cfg_bool(m, "loss.literal_u_sign", rc.loss.literal_u_sign);
    rc.loss.use_loss_u = cfg_bool(m, "loss.use_loss_u", rc.loss.use_loss_u);

    rc.prog.epsilon = cfg_double(m, "progressive.epsilon", rc.prog.epsilon);
    rc.prog.max_iters = cfg_int(m, "progressive.max_iters", rc.prog.max_iters);
    rc.train_opts.guidance_iters =
        cfg_int(m, "progressive.guidance_iters", rc.train_opts.guidance_iters);
    rc.train_opts.unroll_iters =
        cfg_bool(m, "progressive.unroll_iters", rc.train_opts.unroll_iters);

    rc.epochs = cfg_int(m, "train.epochs", rc.epochs);
    rc.lr = cfg_double(m, "train.lr", rc.lr);
    rc.sael = cfg_bool(m, "train.sael", rc.sael);
    rc.n_train = cfg_int(m, "data.n_train", rc.n_train);
    rc.n_val = cfg_int(m, "data.n_val", rc.n_val);
    rc.n_test = cfg_int(m, "data.n_test", rc.n_test);
    rc.height = cfg_int(m, "data.height", rc.height);
    rc.width = cfg_int(m, "data.width", rc.width);
    rc.blur_width = cfg_double(m, "data.blur_width", rc.blur_width);
    rc.noise_sigma = cfg_double(m, "data.noise_sigma", rc.noise_sigma);
    rc.out_dir = cfg_str(m, "run.out_dir", rc.out_dir);
    rc.data_dir = cfg_str(m, "data.dir", rc.data_dir);
}

/// EVSEG_SEED wins over config files and flags.
void apply_env_seed(RunConfig& rc) {
    if (const char* s = std::getenv("EVSEG_SEED")) {
        try {
            rc.net.seed = std::stoull(s);
        } catch (const std::exception&) {
            throw parse_error("EVSEG_SEED: not an integer");
        }
    }
}

/// SAEL off = classic exp generator, no uncertainty term.
void apply_sael(RunConfig& rc) {
    rc.train_opts.generator = rc.sael ? Generator::kEvi : Generator::kExp;
    rc.prog.generator = rc.train_opts.generator;
    rc.loss.use_loss_u = rc.sael && rc.loss.use_loss_u;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

// ---- corpus helpers --------------------------------------------------------

Corpus build_corpus(const RunConfig& rc) {
    return make_corpus(rc.net.seed, rc.n_train, rc.n_val, rc.n_test, rc.height,
                       rc.width, rc.blur_width);
}

std::vector<SegSample> noisy_copy(const std::vector<SegSample>& in,
                                  double sigma, unsigned long long seed) {
    if (sigma <= 0.0) return in;
    std::vector<SegSample> out;
    out.reserve(in.size());
    for (size_t i = 0; i < in.size(); ++i) {
        NoiseSpec spec;
        spec.sigma = sigma;
        spec.seed = seed ^ (0x9e3779b97f4a7c15ULL * (i + 1));
        out.push_back(add_noise(in[i], spec));
    }
    return out;
}

std::vector<SegSample> load_data_dir(const std::string& dir, int channels) {
    if (!fs::is_directory(dir))
        throw parse_error("data dir not found: " + dir);
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        const std::string suffix = ".img.pgm";
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw parse_error("no *.img.pgm files in " + dir);

    std::vector<SegSample> out;
    for (const auto& id : ids) {
        int h = 0, w = 0;
        auto gray = read_pgm16((fs::path(dir) / (id + ".img.pgm")).string(), h, w);
        int mh = 0, mw = 0;
        auto labels =
            read_pgm8((fs::path(dir) / (id + ".mask.pgm")).string(), mh, mw);
        if (mh != h || mw != w)
            throw parse_error("image/mask size mismatch for " + id);
        SegSample s;
        s.id = id;
        s.labels = labels;
        s.image = Tensor::zeros({channels, h, w});
        for (int c = 0; c < channels; ++c)
            std::copy(gray.begin(), gray.end(),
                      s.image.data.begin() + static_cast<size_t>(c) * h * w);
        s.mask_onehot = Tensor::zeros({2, h, w});
        for (int i = 0; i < h * w; ++i) {
            if (labels[i] < 0 || labels[i] > 1)
                throw parse_error("mask labels must be 0/1 in " + id);
            s.mask_onehot.data[labels[i] * h * w + i] = 1.0;
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---- per-image evaluation ----------------------------------------------

struct EvalRecord {
    MetricRow row;
    double mean_uncertainty = 0.0;
    std::vector<IterationDelta> trace;
};

EvalRecord eval_one(const SegSample& s, const NetParams& params,
                    const ProgressiveConfig& prog) {
    const int h = s.image.shape[1], w = s.image.shape[2];
    ProgressiveResult res = progressive_segment(s.image, params, prog);

    EvalRecord rec;
    rec.trace = res.trace;
    BinaryMask pred = BinaryMask::from_labels(res.mask, h, w);
    BinaryMask gt = BinaryMask::from_labels(s.labels, h, w);
    rec.row.image_id = s.id;
    rec.row.dice = dice(pred, gt);
    rec.row.iou = iou(pred, gt);
    rec.row.assd = assd(pred, gt);

    std::vector<int> errl(s.labels.size());
    for (size_t i = 0; i < errl.size(); ++i)
        errl[i] = res.mask[i] != s.labels[i] ? 1 : 0;
    BinaryMask err = BinaryMask::from_labels(errl, h, w);
    rec.row.ueo05 = ueo(err, res.umap.values.data, 0.5);
    rec.row.ueo_max = ueo_max(err, res.umap.values.data);

    double us = 0.0;
    for (double v : res.umap.values.data) us += v;
    rec.mean_uncertainty = us / res.umap.values.size();
    return rec;
}

/// Image order is fixed up front, so the merged report is thread-count
/// invariant.
std::vector<EvalRecord> eval_corpus(const std::vector<SegSample>& samples,
                                    const NetParams& params,
                                    const ProgressiveConfig& prog, int threads) {
    std::vector<EvalRecord> out(samples.size());
    if (threads <= 1) {
        for (size_t i = 0; i < samples.size(); ++i)
            out[i] = eval_one(samples[i], params, prog);
        return out;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    std::atomic<bool> failed{false};
    std::string fail_msg;
    std::mutex fail_mu;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < samples.size();
                 i = next.fetch_add(1)) {
                if (failed.load()) return;
                try {
                    out[i] = eval_one(samples[i], params, prog);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lk(fail_mu);
                    failed = true;
                    fail_msg = e.what();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failed) throw numeric_error("eval: " + fail_msg);
    return out;
}

std::string trace_csv(const std::vector<EvalRecord>& recs,
                      const std::vector<SegSample>& samples) {
    std::ostringstream os;
    os.precision(10);
    os << "image_id,iteration,delta\n";
    for (size_t i = 0; i < recs.size(); ++i)
        for (const auto& d : recs[i].trace)
            os << samples[i].id << ',' << d.iteration << ',' << d.delta << '\n';
    return os.str();
}

// ---- training ----------------------------------------------------------

struct TrainResult {
    NetParams params;
    std::string log_csv;
    double final_val_dice = 0.0;
};

double val_dice(const std::vector<SegSample>& val, const NetParams& params,
                const ProgressiveConfig& prog) {
    if (val.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : val) {
        ProgressiveResult res = progressive_segment(s.image, params, prog);
        const int h = s.image.shape[1], w = s.image.shape[2];
        acc += dice(BinaryMask::from_labels(res.mask, h, w),
                    BinaryMask::from_labels(s.labels, h, w));
    }
    return acc / val.size();
}

TrainResult run_training(const RunConfig& rc, const Corpus& corpus,
                         bool verbose) {
    LossConfig lcfg = rc.loss;
    lcfg.total_epochs = rc.epochs;

    TrainResult tr{NetParams::init(rc.net), "", 0.0};
    Adam opt;
    opt.lr = rc.lr;

    std::ostringstream log;
    log.precision(10);
    log << "epoch,lambda1,loss_ice,loss_kl,loss_u,loss_total,val_dice\n";
    for (int epoch = 0; epoch < rc.epochs; ++epoch) {
        double ice = 0, kl = 0, lu = 0, total = 0;
        for (size_t i = 0; i < corpus.train.size(); ++i) {
            const SegSample& s = corpus.train[i];
            GroundTruth gt = GroundTruth::from_labels(
                s.labels, rc.net.classes, s.image.shape[1], s.image.shape[2]);
            TrainStepResult r;
            try {
                r = train_step(tr.params, opt, s.image, gt, epoch, lcfg,
                               rc.train_opts);
            } catch (const numeric_error& e) {
                throw numeric_error("epoch " + std::to_string(epoch) + " step " +
                                    std::to_string(i) + ": " + e.what());
            }
            if (!std::isfinite(r.total))
                throw numeric_error("non-finite loss at epoch " +
                                    std::to_string(epoch) + " step " +
                                    std::to_string(i));
            ice += r.ice;
            kl += r.kl;
            lu += r.lu;
            total += r.total;
        }
        const double n = static_cast<double>(corpus.train.size());
        const double vd = val_dice(corpus.val, tr.params, rc.prog);
        tr.final_val_dice = vd;
        log << epoch << ',' << lambda1(epoch, lcfg) << ',' << ice / n << ','
            << kl / n << ',' << lu / n << ',' << total / n << ',' << vd << '\n';
        if (verbose)
            std::cout << "epoch " << epoch << " loss " << fmt(total / n)
                      << " val_dice " << fmt(vd) << "\n";
    }
    tr.log_csv = log.str();
    return tr;
}

// ---- commands ----------------------------------------------------------

int cmd_train(const RunConfig& rc) {
    fs::create_directories(rc.out_dir);
    Corpus corpus = build_corpus(rc);
    TrainResult tr = run_training(rc, corpus, /*verbose=*/true);
    save_checkpoint((fs::path(rc.out_dir) / "model.ckpt").string(), tr.params);
    write_text_file((fs::path(rc.out_dir) / "train_log.csv").string(),
                    tr.log_csv);
    std::cout << "checkpoint: " << (fs::path(rc.out_dir) / "model.ckpt").string()
              << "\nfinal_val_dice=" << fmt(tr.final_val_dice) << "\n";
    return kExitOk;
}

int cmd_eval(const RunConfig& rc, const std::string& ckpt_path,
             const std::string& split, int threads) {
    NetParams params = load_checkpoint(ckpt_path);
    std::vector<SegSample> samples;
    if (!rc.data_dir.empty()) {
        samples = load_data_dir(rc.data_dir, params.cfg.in_channels);
    } else {
        Corpus corpus = build_corpus(rc);
        samples = split == "train"  ? corpus.train
                  : split == "val" ? corpus.val
                                   : corpus.test;
    }
    samples = noisy_copy(samples, rc.noise_sigma, rc.net.seed + 1);

    auto recs = eval_corpus(samples, params, rc.prog, threads);
    MetricReport report;
    double mu = 0.0;
    for (const auto& r : recs) {
        report.rows.push_back(r.row);
        mu += r.mean_uncertainty;
    }
    mu /= recs.empty() ? 1.0 : static_cast<double>(recs.size());

    fs::create_directories(rc.out_dir);
    write_text_file((fs::path(rc.out_dir) / "metrics.csv").string(),
                    report.to_csv());
    write_text_file((fs::path(rc.out_dir) / "trace.csv").string(),
                    trace_csv(recs, samples));
    const MetricRow agg = report.aggregate();
    std::cout << "images=" << recs.size() << " mean_dice=" << fmt(agg.dice)
              << " mean_iou=" << fmt(agg.iou)
              << " mean_ueo_max=" << fmt(agg.ueo_max)
              << " mean_uncertainty=" << fmt(mu) << "\n";
    return kExitOk;
}

int cmd_predict(const RunConfig& rc, const std::string& ckpt_path,
                const std::string& image_path, const std::string& mask_path) {
    if (!fs::is_regular_file(image_path))
        throw parse_error("image not readable: " + image_path);
    NetParams params = load_checkpoint(ckpt_path);

    int h = 0, w = 0;
    std::vector<double> gray;
    try {
        gray = read_pgm16(image_path, h, w);
    } catch (const artifact_error& e) {
        throw parse_error(e.what());
    }
    if (h % 4 != 0 || w % 4 != 0)
        throw parse_error("image dimensions must be divisible by 4");
    Tensor image = Tensor::zeros({params.cfg.in_channels, h, w});
    for (int c = 0; c < params.cfg.in_channels; ++c)
        std::copy(gray.begin(), gray.end(),
                  image.data.begin() + static_cast<size_t>(c) * h * w);

    ProgressiveResult res = progressive_segment(image, params, rc.prog);

    fs::create_directories(rc.out_dir);
    const fs::path out(rc.out_dir);
    write_pgm8((out / "pred.pgm").string(), h, w, res.mask,
               params.cfg.classes - 1);
    write_pgm16((out / "umap.pgm").string(), h, w, res.umap.values.data);
    write_f32((out / "umap.f32").string(), res.umap.values);
    std::ostringstream tcsv;
    tcsv.precision(10);
    tcsv << "iteration,delta\n";
    for (const auto& d : res.trace) tcsv << d.iteration << ',' << d.delta << '\n';
    write_text_file((out / "trace.csv").string(), tcsv.str());

    if (!mask_path.empty()) {
        if (!fs::is_regular_file(mask_path))
            throw parse_error("mask not readable: " + mask_path);
        int mh = 0, mw = 0;
        std::vector<int> gt;
        try {
            gt = read_pgm8(mask_path, mh, mw);
        } catch (const artifact_error& e) {
            throw parse_error(e.what());
        }
        if (mh != h || mw != w) throw parse_error("mask/image size mismatch");
        std::vector<int> diff(gt.size());
        for (size_t i = 0; i < gt.size(); ++i)
            diff[i] = res.mask[i] != gt[i] ? 1 : 0;
        write_pgm8((out / "diff.pgm").string(), h, w, diff, 1);
    }
    std::cout << "wrote " << out.string() << "/{pred.pgm,umap.pgm,umap.f32,trace.csv"
              << (mask_path.empty() ? "" : ",diff.pgm") << "}\n";
    return kExitOk;
}

int cmd_ablate(const RunConfig& base, int threads) {
    fs::create_directories(base.out_dir);
    std::ostringstream csv;
    csv.precision(10);
    csv << "euga,sael,generator,use_loss_u,dice,iou,ueo@0.5,ueo_max\n";
    for (int euga = 1; euga >= 0; --euga) {
        for (int sael = 1; sael >= 0; --sael) {
            RunConfig rc = base;
            rc.net.use_euga = euga != 0;
            rc.sael = sael != 0;
            apply_sael(rc);
            Corpus corpus = build_corpus(rc);
            TrainResult tr = run_training(rc, corpus, /*verbose=*/false);

            auto recs = eval_corpus(corpus.test, tr.params, rc.prog, threads);
            MetricReport report;
            for (const auto& r : recs) report.rows.push_back(r.row);
            const MetricRow agg = report.aggregate();
            csv << (euga ? "on" : "off") << ',' << (sael ? "on" : "off") << ','
                << (rc.train_opts.generator == Generator::kEvi ? "evi" : "exp")
                << ',' << (rc.loss.use_loss_u && rc.sael ? 1 : 0) << ','
                << agg.dice << ',' << agg.iou << ',' << agg.ueo05 << ','
                << agg.ueo_max << '\n';
            std::cout << "cell euga=" << (euga ? "on" : "off")
                      << " sael=" << (sael ? "on" : "off")
                      << " dice=" << fmt(agg.dice)
                      << " ueo_max=" << fmt(agg.ueo_max) << "\n";
        }
    }
    const std::string path = (fs::path(base.out_dir) / "ablate.csv").string();
    write_text_file(path, csv.str());
    std::cout << "wrote " << path << "\n";
    return kExitOk;
}

int cmd_synth(const RunConfig& rc) {
    fs::create_directories(rc.out_dir);
    Corpus corpus = build_corpus(rc);
    std::ostringstream manifest;
    manifest << "image_id,split,blur_width\n";
    auto dump = [&](const std::vector<SegSample>& split, const char* name) {
        for (const SegSample& s0 : split) {
            SegSample s = s0;
            if (rc.noise_sigma > 0.0) {
                NoiseSpec spec;
                spec.sigma = rc.noise_sigma;
                spec.seed = rc.net.seed ^ std::hash<std::string>{}(s.id);
                s = add_noise(s, spec);
            }
            const int h = s.image.shape[1], w = s.image.shape[2];
            std::vector<double> gray(s.image.data.begin(),
                                     s.image.data.begin() + h * w);
            const fs::path out(rc.out_dir);
            write_pgm16((out / (s.id + ".img.pgm")).string(), h, w, gray);
            write_pgm8((out / (s.id + ".mask.pgm")).string(), h, w, s.labels, 1);
            manifest << s.id << ',' << name << ',' << s.blur_width << '\n';
        }
    };
    dump(corpus.train, "train");
    dump(corpus.val, "val");
    dump(corpus.test, "test");
    write_text_file((fs::path(rc.out_dir) / "manifest.csv").string(),
                    manifest.str());
    std::cout << "wrote " << rc.n_train + rc.n_val + rc.n_test
              << " samples to " << rc.out_dir << "\n";
    return kExitOk;
}

// Quick self-test: gradient spot checks and the evidential invariants.
int cmd_check(const RunConfig& rc) {
    int failures = 0;
    auto report = [&failures](const std::string& name, bool ok) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
        if (!ok) ++failures;
    };

    std::mt19937_64 rng(rc.net.seed + 12345);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    auto rnd = [&](std::vector<int> shape) {
        Tensor t = Tensor::zeros(shape);
        for (double& v : t.data) v = dist(rng);
        return t;
    };

    {
        double worst = 0.0;
        for (int rep = 0; rep < 20; ++rep) {
            Tensor x = rnd({3, 4});
            worst = std::max(
                worst, finite_diff_check(
                           [](Tape& t, Tensor& v) {
                               return sum(&t, mul(&t, silu(&t, v), exp(&t, affine(&t, v, 0.3, 0.0))));
                           },
                           x, 1e-6));
        }
        report("tensor-op gradients vs finite differences (worst " + fmt(worst) + ")",
               worst < 1e-5);
    }
    {
        double worst = 0.0;
        for (int rep = 0; rep < 20; ++rep) {
            Tensor logits = rnd({2, 4, 4});
            GroundTruth gt = GroundTruth::from_labels(
                std::vector<int>(16, rep % 2), 2, 4, 4);
            LossConfig lcfg = rc.loss;
            lcfg.total_epochs = 10;
            worst = std::max(
                worst,
                finite_diff_check(
                    [&](Tape& t, Tensor& v) {
                        EvidenceField f = to_field(&t, evi_generate(&t, v));
                        return loss_total(&t, f, gt, 2, lcfg);
                    },
                    logits, 1e-6));
        }
        report("loss gradients vs finite differences (worst " + fmt(worst) + ")",
               worst < 1e-5);
    }
    {
        bool ok = true;
        std::uniform_real_distribution<double> wide(-8.0, 8.0);
        for (int rep = 0; rep < 10000 && ok; ++rep) {
            Tensor logits = Tensor::zeros({2, 1, 1});
            for (double& v : logits.data) v = wide(rng);
            EvidenceField f = to_field(nullptr, evi_generate(nullptr, logits));
            const double psum = f.expected_prob.data[0] + f.expected_prob.data[1];
            ok = ok && f.evidence.data[0] >= 0.0 && f.evidence.data[1] >= 0.0;
            ok = ok && std::abs(psum - 1.0) <= 1e-12;
            ok = ok && f.uncertainty.data[0] > 0.0 && f.uncertainty.data[0] <= 1.0;
        }
        report("evidential invariants on 10^4 random logit vectors", ok);
    }
    if (failures > 0) {
        std::cerr << failures << " check(s) failed\n";
        return kExitNumeric;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    // The config file seeds the defaults; explicit flags (parsed below)
    // override it, so the file has to be read before CLI11 binds values.
    std::string pre_config;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) pre_config = argv[i + 1];
        else if (a.rfind("--config=", 0) == 0) pre_config = a.substr(9);
    }

    CLI::App app{"evidential segmentation toolkit"};
    app.require_subcommand(1);

    RunConfig rc;
    std::string config_path, ckpt_path, image_path, mask_path, split = "test";
    int threads = 1;
    long long seed_flag = -1;
    int size_flag = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file");
        sub->add_option("--seed", seed_flag, "override config seed");
        sub->add_option("--out", rc.out_dir, "output directory");
    };
    auto add_corpus = [&](CLI::App* sub) {
        sub->add_option("--synth", rc.n_train, "synthetic training images");
        sub->add_option("--val", rc.n_val, "validation images");
        sub->add_option("--test", rc.n_test, "test images");
        sub->add_option("--size", size_flag, "square image side (multiple of 4)");
        sub->add_option("--blur", rc.blur_width, "boundary blur width");
    };

    CLI::App* train = app.add_subcommand("train", "train a model");
    add_common(train);
    add_corpus(train);
    train->add_option("--epochs", rc.epochs, "training epochs");
    train->add_option("--lr", rc.lr, "Adam learning rate");
    train->add_flag("!--no-euga", rc.net.use_euga, "disable the attention skip");
    train->add_flag("!--no-sael", rc.sael, "classic exp generator, no L_u");
    train->add_flag("--unroll", rc.train_opts.unroll_iters,
                    "backprop through all guidance iterations");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval);
    add_corpus(eval);
    eval->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    eval->add_option("--data", rc.data_dir, "directory of *.img.pgm/*.mask.pgm");
    eval->add_option("--split", split, "test|val|train (synthetic corpus)");
    eval->add_option("--noise", rc.noise_sigma, "Gaussian noise sigma");
    eval->add_option("--threads", threads, "parallel evaluation threads");

    CLI::App* predict = app.add_subcommand("predict", "segment one image");
    add_common(predict);
    predict->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    predict->add_option("--image", image_path, "input 16-bit PGM")->required();
    predict->add_option("--mask", mask_path, "optional ground-truth 8-bit PGM");

    CLI::App* ablate = app.add_subcommand("ablate", "2x2 EUGA/SAEL grid");
    add_common(ablate);
    add_corpus(ablate);
    ablate->add_option("--epochs", rc.epochs, "training epochs per cell");
    ablate->add_option("--lr", rc.lr, "Adam learning rate");
    ablate->add_option("--threads", threads, "parallel evaluation threads");

    CLI::App* synth = app.add_subcommand("synth", "generate a corpus on disk");
    add_common(synth);
    add_corpus(synth);
    synth->add_option("--noise", rc.noise_sigma, "Gaussian noise sigma");

    CLI::App* check = app.add_subcommand("check", "gradient/invariant self-test");
    add_common(check);

    if (!pre_config.empty()) {
        try {
            if (!fs::is_regular_file(pre_config))
                throw parse_error("config file not found: " + pre_config);
            merge_config_file(rc, pre_config);
        } catch (const parse_error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitInput;
        }
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (seed_flag >= 0) rc.net.seed = static_cast<unsigned long long>(seed_flag);
        apply_env_seed(rc);
        if (size_flag > 0) rc.height = rc.width = size_flag;
        apply_sael(rc);

        if (train->parsed()) return cmd_train(rc);
        if (eval->parsed()) return cmd_eval(rc, ckpt_path, split, threads);
        if (predict->parsed()) return cmd_predict(rc, ckpt_path, image_path, mask_path);
        if (ablate->parsed()) return cmd_ablate(rc, threads);
        if (synth->parsed()) return cmd_synth(rc);
        if (check->parsed()) return cmd_check(rc);
        return kExitInput;
    } catch (const parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const dim_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const contract_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const artifact_error& e) {
        std::cerr << "artifact error: " << e.what() << "\n";
        return kExitArtifact;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
}
