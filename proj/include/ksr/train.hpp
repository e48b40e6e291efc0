#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "ksr/image.hpp"
#include "ksr/loss.hpp"
#include "ksr/nn/rdunet.hpp"

namespace ksr {

struct TrainConfig {
    int epochs = 200;
    int batch_size = 3;
    double lr0 = 0.02;
    double momentum = 0.5;
    int lr_halve_every = 20;
    double alpha = 0.01;
    std::uint64_t seed = 0;
    int precision = 32;       // 32 or 64
    int max_iters = 0;        // 0 = no cap; otherwise stop after this many batches
    int checkpoint_every = 20;

    bool operator==(const TrainConfig&) const = default;
};

struct SamplePair {
    RealImage input;  // normalized zero-filled reconstruction
    RealImage target; // normalized fully sampled reconstruction
};

// (img - mean) / (std + eps); population std, eps = 1e-8.
inline RealImage normalize(const RealImage& img) {
    const double n = static_cast<double>(img.size());
    double mean = 0;
    for (double x : img.v) mean += x;
    mean /= n;
    double var = 0;
    for (double x : img.v) var += (x - mean) * (x - mean);
    const double std = std::sqrt(var / n);
    RealImage out(img.ny, img.nx);
    const double inv = 1.0 / (std + 1e-8);
    for (size_t i = 0; i < img.size(); ++i) out.v[i] = (img.v[i] - mean) * inv;
    return out;
}

namespace detail {

inline RealImage rot90(const RealImage& a) {
    RealImage out(a.nx, a.ny);
    for (int i = 0; i < a.ny; ++i)
        for (int j = 0; j < a.nx; ++j) out.at(a.nx - 1 - j, i) = a.at(i, j);
    return out;
}

inline RealImage mirror_lr(const RealImage& a) {
    RealImage out(a.ny, a.nx);
    for (int i = 0; i < a.ny; ++i)
        for (int j = 0; j < a.nx; ++j) out.at(i, a.nx - 1 - j) = a.at(i, j);
    return out;
}

} // namespace detail

// The 8 dihedral-group images of a square input; element 0 is the identity.
inline std::array<RealImage, 8> augment8(const RealImage& img) {
    if (img.ny != img.nx) throw Error("ShapeMismatch", "augment8 needs a square image");
    std::array<RealImage, 8> out;
    out[0] = img;
    for (int k = 1; k < 4; ++k) out[k] = detail::rot90(out[k - 1]);
    out[4] = detail::mirror_lr(img);
    for (int k = 5; k < 8; ++k) out[k] = detail::rot90(out[k - 1]);
    return out;
}

inline double lr_schedule(int epoch, const TrainConfig& cfg) {
    return cfg.lr0 * std::pow(0.5, epoch / cfg.lr_halve_every);
}

// Heavy-ball SGD: v <- momentum*v + grad; p <- p - lr*v.
template <typename T>
void sgd_step(std::vector<nn::Param<T>*>& params, double lr, double momentum) {
    for (auto* p : params)
        if (!p->has_grad) throw Error("NoGradient", p->name);
    for (auto* p : params) {
        for (size_t i = 0; i < p->value.size(); ++i) {
            p->vel[i] = static_cast<T>(momentum) * p->vel[i] + p->grad[i];
            p->value[i] -= static_cast<T>(lr) * p->vel[i];
        }
        p->has_grad = false;
    }
}

struct TrainResult {
    std::vector<LossReport> epoch_loss; // mean training loss per epoch
    std::vector<LossReport> iter_loss;  // per-batch loss, in order
    int iters_run = 0;
};

template <typename T>
nn::Tensor4<T> pairs_to_tensor(const std::vector<SamplePair>& pairs,
                               const std::vector<size_t>& idx, size_t lo, size_t hi,
                               bool targets) {
    const RealImage& first = targets ? pairs[idx[lo]].target : pairs[idx[lo]].input;
    nn::Tensor4<T> t(static_cast<int>(hi - lo), 1, first.ny, first.nx);
    for (size_t s = lo; s < hi; ++s) {
        const RealImage& img = targets ? pairs[idx[s]].target : pairs[idx[s]].input;
        if (img.ny != first.ny || img.nx != first.nx) throw Error("ShapeMismatch");
        T* dst = t.slice(static_cast<int>(s - lo), 0);
        for (size_t i = 0; i < img.size(); ++i) dst[i] = static_cast<T>(img.v[i]);
    }
    return t;
}

// Seeded epoch loop: shuffle, batch (partial final batch kept), forward,
// loss, backward, SGD step; BN runs in train mode. The optional callback is
// invoked at every checkpoint boundary and once at the end.
template <typename T>
TrainResult train_loop(const std::vector<SamplePair>& dataset, nn::RDUNet<T>& net,
                       const TrainConfig& cfg,
                       const std::function<void(int epoch, nn::RDUNet<T>&)>& checkpoint_cb = {}) {
    if (dataset.empty()) throw Error("ShapeMismatch", "empty dataset");
    if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.lr0 < 0 || cfg.momentum < 0 ||
        cfg.momentum >= 1)
        throw Error("InvalidConfig", "bad training configuration");

    std::mt19937_64 rng(cfg.seed ^ 0x5deece66dULL);
    std::vector<size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), size_t{0});

    TrainResult result;
    auto params = net.params();
    bool stop = false;
    for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const double lr = lr_schedule(epoch, cfg);
        LossReport epoch_sum;
        int n_batches = 0;
        for (size_t lo = 0; lo < idx.size(); lo += cfg.batch_size) {
            const size_t hi = std::min(idx.size(), lo + cfg.batch_size);
            auto x = pairs_to_tensor<T>(dataset, idx, lo, hi, false);
            auto y = pairs_to_tensor<T>(dataset, idx, lo, hi, true);

            net.zero_grad();
            auto pred = net.forward(x, nn::Mode::Train);
            if (!nn::all_finite(pred))
                throw Error("DivergedTraining", "epoch " + std::to_string(epoch));
            LossReport rep = loss_forward(pred, y, cfg.alpha);
            if (!std::isfinite(rep.total))
                throw Error("DivergedTraining", "epoch " + std::to_string(epoch));
            auto gpred = loss_backward(pred, y, cfg.alpha);
            net.backward(gpred);
            sgd_step(params, lr, cfg.momentum);

            result.iter_loss.push_back(rep);
            epoch_sum.total += rep.total;
            epoch_sum.l2_term += rep.l2_term;
            epoch_sum.fourier_term += rep.fourier_term;
            ++n_batches;
            ++result.iters_run;
            if (cfg.max_iters > 0 && result.iters_run >= cfg.max_iters) {
                stop = true;
                break;
            }
        }
        LossReport mean;
        mean.alpha = cfg.alpha;
        mean.total = epoch_sum.total / n_batches;
        mean.l2_term = epoch_sum.l2_term / n_batches;
        mean.fourier_term = epoch_sum.fourier_term / n_batches;
        result.epoch_loss.push_back(mean);
        if (checkpoint_cb && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0)
            checkpoint_cb(epoch + 1, net);
    }
    if (checkpoint_cb) checkpoint_cb(-1, net); // final
    return result;
}

} // namespace ksr
