// Acceptance harness: one line per criterion, nonzero exit on any failure.
// Tolerances and scales are fixed here; do not relax them to make a run pass.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "ksr/grappa.hpp"
#include "ksr/loss.hpp"
#include "ksr/metrics.hpp"
#include "ksr/pipeline.hpp"
#include "ksr/train.hpp"
#include "oracles.hpp"

using namespace ksr;
using nn::Mode;
using nn::Param;
using nn::Tensor4;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const char* name, bool ok, const std::string& detail = "") {
    std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", name, detail.empty() ? "" : " -- ",
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::mt19937_64 g_rng(20240601);

// ---- criterion 1: gradient suite ------------------------------------------

template <typename ForwardFn, typename BackwardFn>
double max_grad_rel_err(Tensor4<double>& x, std::vector<Param<double>*> params,
                        ForwardFn fwd, BackwardFn bwd, double floor) {
    const auto loss = [&] {
        const Tensor4<double> out = fwd();
        double s = 0;
        for (double v : out.v) s += v * v;
        return s;
    };
    for (auto* p : params) p->zero_grad();
    Tensor4<double> out = fwd();
    Tensor4<double> gout = out;
    for (auto& v : gout.v) v *= 2.0;
    const Tensor4<double> gin = bwd(gout);

    const auto rel = [floor](double a, double b) {
        return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
    };
    double err = 0;
    for (size_t i = 0; i < x.size(); ++i)
        err = std::max(err, rel(oracle::central_diff(x.v, i, loss), gin.v[i]));
    for (auto* p : params)
        for (size_t i = 0; i < p->value.size(); ++i)
            err = std::max(err, rel(oracle::central_diff(p->value, i, loss), p->grad[i]));
    return err;
}

void criterion_gradient_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_layer = 0, worst_net = 0;

    for (int trial = 0; trial < 20; ++trial) {
        {
            nn::Conv2d<double> conv(2, 3, 3, "c3");
            conv.init(g_rng);
            Tensor4<double> x = oracle::random_tensor(g_rng, 2, 2, 4, 4);
            worst_layer = std::max(
                worst_layer, max_grad_rel_err(
                                 x, {&conv.weight, &conv.bias}, [&] { return conv.forward(x); },
                                 [&](const Tensor4<double>& g) { return conv.backward(g); }, 1e-6));
        }
        {
            nn::Conv2d<double> conv(3, 2, 1, "c1");
            conv.init(g_rng);
            Tensor4<double> x = oracle::random_tensor(g_rng, 2, 3, 4, 4);
            worst_layer = std::max(
                worst_layer, max_grad_rel_err(
                                 x, {&conv.weight, &conv.bias}, [&] { return conv.forward(x); },
                                 [&](const Tensor4<double>& g) { return conv.backward(g); }, 1e-6));
        }
        {
            nn::BatchNorm2d<double> bn(2, "bn");
            bn.gamma.value = {1.2, 0.8};
            bn.beta.value = {0.1, -0.3};
            Tensor4<double> x = oracle::random_tensor(g_rng, 2, 2, 3, 3);
            worst_layer = std::max(
                worst_layer,
                max_grad_rel_err(
                    x, {&bn.gamma, &bn.beta}, [&] { return bn.forward(x, Mode::Train); },
                    [&](const Tensor4<double>& g) { return bn.backward(g); }, 1e-4));
        }
        {
            nn::Activation<double> act; // PoLU, n = 1
            Tensor4<double> x = oracle::random_tensor(g_rng, 2, 2, 4, 4);
            for (auto& v : x.v)
                if (std::abs(v) < 1e-3) v += 0.1; // stay off the joint at 0
            worst_layer = std::max(
                worst_layer, max_grad_rel_err(
                                 x, {}, [&] { return act.forward(x); },
                                 [&](const Tensor4<double>& g) { return act.backward(g); }, 1e-6));
        }
        {
            nn::MaxPool2<double> pool;
            Tensor4<double> x(1, 2, 4, 4);
            bool separated = false; // keep window entries apart so FD cannot flip the argmax
            while (!separated) {
                x = oracle::random_tensor(g_rng, 1, 2, 4, 4);
                separated = true;
                for (int c = 0; c < 2 && separated; ++c)
                    for (int wy = 0; wy < 4 && separated; wy += 2)
                        for (int wx = 0; wx < 4 && separated; wx += 2) {
                            const double vals[4] = {x.at(0, c, wy, wx), x.at(0, c, wy, wx + 1),
                                                    x.at(0, c, wy + 1, wx),
                                                    x.at(0, c, wy + 1, wx + 1)};
                            for (int i = 0; i < 4; ++i)
                                for (int j = i + 1; j < 4; ++j)
                                    if (std::abs(vals[i] - vals[j]) < 1e-3) separated = false;
                        }
            }
            worst_layer = std::max(
                worst_layer, max_grad_rel_err(
                                 x, {}, [&] { return pool.forward(x); },
                                 [&](const Tensor4<double>& g) { return pool.backward(g); }, 1e-6));
        }
        {
            nn::Deconv2<double> up(4, "up");
            up.init(g_rng);
            Tensor4<double> x = oracle::random_tensor(g_rng, 2, 4, 3, 3);
            worst_layer = std::max(
                worst_layer, max_grad_rel_err(
                                 x, {&up.weight, &up.bias}, [&] { return up.forward(x); },
                                 [&](const Tensor4<double>& g) { return up.backward(g); }, 1e-6));
        }
        {
            // concat + split as a round trip (exact adjoint pair)
            Tensor4<double> x = oracle::random_tensor(g_rng, 1, 6, 3, 3);
            worst_layer = std::max(
                worst_layer, max_grad_rel_err(
                                 x, {},
                                 [&] {
                                     auto [a, b] = nn::split_channels(x, 2, 4);
                                     return nn::concat_channels(a, b);
                                 },
                                 [&](const Tensor4<double>& g) {
                                     auto [ga, gb] = nn::split_channels(g, 2, 4);
                                     return nn::concat_channels(ga, gb);
                                 },
                                 1e-6));
        }
        {
            nn::NetConfig cfg;
            nn::RDB<double> rdb(3, cfg, "rdb");
            std::mt19937_64 rng(trial + 100);
            rdb.init(rng);
            std::vector<Param<double>*> params;
            rdb.collect(params);
            Tensor4<double> x = oracle::random_tensor(g_rng, 2, 3, 4, 4);
            worst_layer = std::max(
                worst_layer,
                max_grad_rel_err(
                    x, params, [&] { return rdb.forward(x, Mode::Train); },
                    [&](const Tensor4<double>& g) { return rdb.backward(g); }, 1e-4));
        }
        {
            nn::NetConfig cfg;
            cfg.depth = 1;
            cfg.base_channels = 4;
            nn::RDUNet<double> net(cfg, 500 + trial);
            auto params = net.params();
            Tensor4<double> x = oracle::random_tensor(g_rng, 1, 1, 8, 8);
            worst_net = std::max(
                worst_net, max_grad_rel_err(
                               x, params, [&] { return net.forward(x, Mode::Train); },
                               [&](const Tensor4<double>& g) { return net.backward(g); }, 1e-4));
        }
    }
    const double dt = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "layer err %.3g (<1e-4), full net err %.3g (<1e-3), %.1fs (<120s)", worst_layer,
                  worst_net, dt);
    report("gradient suite: all layers and the full depth-1 network",
           worst_layer < 1e-4 && worst_net < 1e-3 && dt < 120.0, detail);
}

// ---- criterion 2: RDB degeneracy ------------------------------------------

void criterion_rdb_degeneracy() {
    nn::NetConfig cfg;
    nn::RDB<double> rdb(4, cfg, "rdb");
    std::mt19937_64 rng(1);
    rdb.init(rng);
    std::fill(rdb.conv2.weight.value.begin(), rdb.conv2.weight.value.end(), 0.0);
    std::fill(rdb.conv2.bias.value.begin(), rdb.conv2.bias.value.end(), 0.0);
    Tensor4<double> x = oracle::random_tensor(g_rng, 2, 4, 8, 8);
    const Tensor4<double> out = rdb.forward(x, Mode::Train);
    report("residual dense block with zeroed second conv is the bit-exact identity",
           out.v == x.v);
}

// ---- criterion 3: Fourier core --------------------------------------------

void criterion_fourier() {
    bool parseval_ok = true, oracle_ok = true, alias_ok = true;
    double parseval_worst = 0, oracle_worst = 0, alias_worst = 0;

    for (int trial = 0; trial < 5; ++trial) {
        std::normal_distribution<double> dist;
        ComplexImage img(16, 12);
        for (auto& z : img.v) z = {dist(g_rng), dist(g_rng)};
        const ComplexImage f = fft2c(img);
        double ei = 0, ef = 0;
        for (const auto& z : img.v) ei += std::norm(z);
        for (const auto& z : f.v) ef += std::norm(z);
        const double rel = std::abs(ef - ei) / ei;
        parseval_worst = std::max(parseval_worst, rel);
        if (rel > 1e-6) parseval_ok = false;
    }

    {
        std::normal_distribution<double> dist;
        ComplexImage img(8, 8);
        for (auto& z : img.v) z = {dist(g_rng), dist(g_rng)};
        const ComplexImage fast = fft2c(img);
        const ComplexImage naive = oracle::naive_fft2c(img);
        for (size_t i = 0; i < fast.size(); ++i) {
            const double d = std::abs(fast.v[i] - naive.v[i]);
            oracle_worst = std::max(oracle_worst, d);
            if (d > 1e-10) oracle_ok = false;
        }
    }

    {
        // uniform R=4, single coil: the zero-filled image is the mean of 4
        // row-shifted copies of the original
        const int n = 64, R = 4;
        const RealImage img = shepp_logan(n, n);
        CoilKSpace full(1, n, n);
        full.set_coil(0, fft2c(img));
        const RealImage rec = zero_filled_recon(apply_mask(full, build_mask(n, R, 0)));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double expect = 0;
                for (int k = 0; k < R; ++k) expect += img.at((i + k * n / R) % n, j);
                expect /= R;
                const double d = std::abs(rec.at(i, j) - expect);
                alias_worst = std::max(alias_worst, d);
                if (d > 1e-6) alias_ok = false;
            }
    }

    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "parseval %.3g (<1e-6), oracle %.3g (<1e-10), alias %.3g (<1e-6)",
                  parseval_worst, oracle_worst, alias_worst);
    report("fourier core: parseval, naive-DFT oracle on 8x8, aliasing replicas",
           parseval_ok && oracle_ok && alias_ok, detail);
}

// ---- criterion 4: loss ------------------------------------------------------

void criterion_loss() {
    bool ok = true;
    std::string why;

    Tensor4<double> pred = oracle::random_tensor(g_rng, 2, 1, 8, 8);
    Tensor4<double> target = oracle::random_tensor(g_rng, 2, 1, 8, 8);

    const LossReport r0 = loss_forward(pred, target, 0.0);
    if (r0.total != r0.l2_term) {
        ok = false;
        why = "alpha=0 total != l2";
    }

    double prev = -1;
    for (double a : {0.0, 0.005, 0.01, 0.05}) {
        const LossReport r = loss_forward(pred, target, a);
        if (r.total <= prev) {
            ok = false;
            why = "total not strictly increasing in alpha";
        }
        prev = r.total;
    }

    // gradient at a smooth point: reject pairs with movable near-kink components
    double worst = 0;
    for (int trial = 0; trial < 3; ++trial) {
        Tensor4<double> p(1, 1, 4, 4), t(1, 1, 4, 4);
        bool smooth = false;
        while (!smooth) {
            p = oracle::random_tensor(g_rng, 1, 1, 4, 4);
            t = oracle::random_tensor(g_rng, 1, 1, 4, 4);
            ComplexImage diff(4, 4);
            for (size_t i = 0; i < diff.size(); ++i) diff.v[i] = {t.v[i] - p.v[i], 0.0};
            smooth = true;
            for (const auto& z : fft2c(diff).v) {
                if (z.real() != 0.0 && std::abs(z.real()) < 1e-3) smooth = false;
                if (z.imag() != 0.0 && std::abs(z.imag()) < 1e-3) smooth = false;
            }
        }
        const double alpha = 0.05;
        const Tensor4<double> g = loss_backward(p, t, alpha);
        const auto loss = [&] { return loss_forward(p, t, alpha).total; };
        for (size_t i = 0; i < p.size(); ++i)
            worst = std::max(worst, oracle::rel_err(oracle::central_diff(p.v, i, loss), g.v[i]));
    }
    if (worst >= 1e-4) {
        ok = false;
        why = "gradient check failed";
    }

    char detail[120];
    std::snprintf(detail, sizeof(detail), "grad err %.3g (<1e-4)%s%s", worst,
                  why.empty() ? "" : "; ", why.c_str());
    report("loss: alpha=0 reduction, monotone in alpha, smooth-point gradients", ok, detail);
}

// ---- criterion 5: GRAPPA property ------------------------------------------

void criterion_grappa() {
    const auto t0 = std::chrono::steady_clock::now();
    const SamplingMask mask = build_mask(64, 4, 16);
    const SensitivityMaps sens = make_sensitivities(8, 64, 64);
    double sum_g = 0, sum_zf = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const RealImage img = random_phantom(64, 64, seed);
        const CoilKSpace masked = apply_mask(forward_acquire(img, sens), mask);
        sum_zf += mse(img, zero_filled_recon(masked));
        sum_g += mse(img, method_grappa()(masked, mask));
    }
    const double dt = seconds_since(t0);
    char detail[120];
    std::snprintf(detail, sizeof(detail), "ratio %.3f (<=0.70), %.1fs (<60s)", sum_g / sum_zf, dt);
    report("interpolation baseline: 5-seed mean MSE <= 0.7 x zero-fill at R=4",
           sum_g <= 0.7 * sum_zf && dt < 60.0, detail);
}

// ---- criterion 6: toy training ---------------------------------------------

RunConfig toy_run_config() {
    RunConfig cfg;
    cfg.net.depth = 2;
    cfg.net.base_channels = 16;
    cfg.size = 64;
    cfg.coils = 8;
    cfg.accel = 4;
    cfg.n_acs = 16;
    cfg.n_phantoms = 4; // 4 phantoms x 8 dihedral images = 32 pairs
    cfg.train.epochs = 1000;
    cfg.train.max_iters = 200;
    cfg.train.batch_size = 3;
    cfg.train.lr0 = 0.02;
    cfg.train.momentum = 0.5;
    cfg.train.lr_halve_every = 20;
    cfg.train.alpha = 0.01;
    cfg.train.seed = 1;
    cfg.train.checkpoint_every = 0;
    return cfg;
}

std::vector<double> run_toy_training(const RunConfig& cfg, nn::RDUNet<double>& net) {
    const auto dataset = build_training_set(cfg, default_phantoms(cfg));
    std::vector<double> history;
    for (const auto& r : train_loop(dataset, net, cfg.train).iter_loss)
        history.push_back(r.total);
    return history;
}

void criterion_toy_training() {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig cfg = toy_run_config();

    nn::RDUNet<double> net(cfg.net, cfg.train.seed);
    const std::vector<double> h1 = run_toy_training(cfg, net);
    const bool drop_ok = h1.size() == 200 && h1.back() <= 0.5 * h1.front();

    // held-out comparison on 8 phantoms the training never saw
    const SensitivityMaps sens = make_sensitivities(cfg.coils, cfg.size, cfg.size);
    const SamplingMask mask = build_mask(cfg.size, cfg.accel, cfg.n_acs);
    double net_sum = 0, zf_sum = 0;
    for (int i = 0; i < 8; ++i) {
        const RealImage truth = random_phantom(cfg.size, cfg.size, 90000 + i);
        const CoilKSpace full = forward_acquire(truth, sens);
        const RealImage target = normalize(zero_filled_recon(full));
        const CoilKSpace masked = apply_mask(full, mask);
        const RealImage zf = normalize(zero_filled_recon(masked));
        zf_sum += mse(target, zf);
        Tensor4<double> x(1, 1, cfg.size, cfg.size);
        std::copy(zf.v.begin(), zf.v.end(), x.v.begin());
        const Tensor4<double> y = net.forward(x, Mode::Eval);
        RealImage recon(cfg.size, cfg.size);
        std::copy(y.v.begin(), y.v.end(), recon.v.begin());
        net_sum += mse(target, normalize(recon));
    }
    const bool heldout_ok = net_sum < zf_sum;

    // bit-identical reproduction from the same seed
    nn::RDUNet<double> net2(cfg.net, cfg.train.seed);
    const std::vector<double> h2 = run_toy_training(cfg, net2);
    const bool repro_ok = h1 == h2;

    const double dt = seconds_since(t0);
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "loss %.4f -> %.4f (drop %.0f%%, need >=50%%), heldout net %.4f vs zf %.4f, "
                  "rerun %s, %.0fs (<900s)",
                  h1.front(), h1.back(), 100.0 * (1.0 - h1.back() / h1.front()), net_sum / 8,
                  zf_sum / 8, repro_ok ? "bit-identical" : "DIFFERS", dt);
    report("toy training: >=50% loss drop, beats zero-fill held out, reproducible",
           drop_ok && heldout_ok && repro_ok && dt < 900.0, detail);
}

// ---- criterion 7: alpha sweep ----------------------------------------------

void criterion_alpha_sweep() {
    RunConfig cfg = toy_run_config();
    // smaller scale: the criterion is that the harness runs and ranks
    cfg.net.base_channels = 8;
    cfg.size = 32;
    cfg.n_acs = 8;
    cfg.n_phantoms = 2;
    cfg.train.max_iters = 30;
    const std::vector<double> alphas{0.05, 0.01, 0.005, 0.0};
    const auto results = alpha_sweep<double>(alphas, cfg, 2);
    bool ok = results.size() == alphas.size();
    for (size_t i = 0; ok && i + 1 < results.size(); ++i)
        if (results[i].heldout_mse > results[i + 1].heldout_mse) ok = false;
    std::string order;
    for (const auto& r : results) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%g:%.4f ", r.alpha, r.heldout_mse);
        order += buf;
    }
    report("alpha sweep harness ranks {0.05, 0.01, 0.005, 0} by held-out MSE", ok, order);
}

// ---- criterion 8: schedule/optimizer unit checks ----------------------------

void criterion_schedule() {
    TrainConfig cfg;
    cfg.lr0 = 0.02;
    cfg.lr_halve_every = 20;
    const bool lr_ok = lr_schedule(0, cfg) == 0.02 && lr_schedule(40, cfg) == 0.005;

    const double lr = 0.01, mu = 0.5, g = 0.7;
    Param<double> p;
    p.resize(1);
    p.value = {1.0};
    std::vector<Param<double>*> params{&p};
    for (int s = 0; s < 2; ++s) {
        p.grad = {g};
        p.has_grad = true;
        sgd_step(params, lr, mu);
    }
    const double expect = 1.0 - lr * g * (2.0 + mu);
    const bool mom_ok = std::abs(p.value[0] - expect) <= 1e-12;

    char detail[120];
    std::snprintf(detail, sizeof(detail), "lr(0)=%g lr(40)=%g, two-step delta %.2e (<=1e-12)",
                  lr_schedule(0, cfg), lr_schedule(40, cfg), std::abs(p.value[0] - expect));
    report("schedule and momentum closed forms", lr_ok && mom_ok, detail);
}

// ---- criterion 9: end-to-end CLI reproducibility ----------------------------

std::string file_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

int run_cmd(const std::string& cmd) { return std::system(cmd.c_str()); }

bool run_pipeline(const fs::path& root) {
    const std::string cli = KSR_CLI_PATH;
    fs::create_directories(root);
    const fs::path cfg_path = root / "run.toml";
    {
        std::ofstream f(cfg_path);
        f << "[net]\ndepth = 1\nbase_channels = 4\n\n"
             "[train]\nepochs = 2\nbatch_size = 4\nlr0 = 0.01\nseed = 7\nprecision = 64\n"
             "checkpoint_every = 0\n\n"
             "[mask]\naccel = 4\nacs = 16\n\n"
             "[data]\ncoils = 4\nsize = 32\nn_phantoms = 1\ndir = "
          << (root / "phantoms").string() << "\n\n[out]\ndir = " << (root / "train").string()
          << "\n";
    }
    const std::string q = "\"";
    if (run_cmd(cli + " phantom --size 32 --count 1 --seed 7 --out " + q +
                (root / "phantoms").string() + q) != 0)
        return false;
    if (run_cmd(cli + " undersample --in " + q + (root / "phantoms").string() + q +
                " --accel 4 --acs 16 --coils 4 --out " + q + (root / "slices").string() + q) != 0)
        return false;
    if (run_cmd(cli + " train --config " + q + cfg_path.string() + q) != 0) return false;
    if (run_cmd(cli + " eval --config " + q + cfg_path.string() + q + " --checkpoint " + q +
                (root / "train" / "checkpoint_final.ksr").string() + q + " --seeds 2 --out " + q +
                (root / "report.txt").string() + q) != 0)
        return false;
    return true;
}

void criterion_cli_reproducibility() {
    const fs::path base = fs::temp_directory_path() / "ksr_acceptance";
    std::error_code ec;
    fs::remove_all(base, ec);
    const fs::path a = base / "a", b = base / "b";
    if (!run_pipeline(a) || !run_pipeline(b)) {
        report("end-to-end CLI pipeline repeats byte-identically", false, "pipeline run failed");
        return;
    }
    const std::vector<std::string> artifacts = {
        "phantoms/phantom_000.ksr", "slices/slice_000.ksr",    "train/checkpoint_initial.ksr",
        "train/checkpoint_final.ksr", "train/loss_history.txt", "report.txt", "report.txt.kv",
    };
    bool ok = true;
    std::string bad;
    for (const auto& rel : artifacts) {
        const std::string ba = file_bytes(a / rel), bb = file_bytes(b / rel);
        if (ba.empty() || ba != bb) {
            ok = false;
            bad += rel + " ";
        }
    }
    report("end-to-end CLI pipeline repeats byte-identically", ok,
           ok ? std::to_string(artifacts.size()) + " artifacts compared" : "differs: " + bad);
}

} // namespace

int main() {
    criterion_gradient_suite();
    criterion_rdb_degeneracy();
    criterion_fourier();
    criterion_loss();
    criterion_grappa();
    criterion_toy_training();
    criterion_alpha_sweep();
    criterion_schedule();
    criterion_cli_reproducibility();
    std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
