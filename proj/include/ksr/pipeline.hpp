#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "ksr/checkpoint.hpp"
#include "ksr/config.hpp"
#include "ksr/metrics.hpp"
#include "ksr/train.hpp"

namespace ksr {

// One ground-truth image -> (normalized zero-filled, normalized fully
// sampled) pair under the given mask and coil setup.
inline SamplePair make_pair(const RealImage& truth, const SensitivityMaps& sens,
                            const SamplingMask& mask) {
    const CoilKSpace full = forward_acquire(truth, sens);
    SamplePair p;
    p.target = normalize(zero_filled_recon(full));
    p.input = normalize(zero_filled_recon(apply_mask(full, mask)));
    return p;
}

// Dihedral augmentation applied identically to input and target.
inline std::vector<SamplePair> augment_pairs(const std::vector<SamplePair>& pairs) {
    std::vector<SamplePair> out;
    out.reserve(pairs.size() * 8);
    for (const auto& p : pairs) {
        const auto ins = augment8(p.input);
        const auto tgts = augment8(p.target);
        for (int k = 0; k < 8; ++k) out.push_back({ins[k], tgts[k]});
    }
    return out;
}

// Training set per the run config: n_phantoms jittered phantoms, 8x augmented.
inline std::vector<SamplePair> build_training_set(const RunConfig& cfg,
                                                  const std::vector<RealImage>& truths) {
    const SensitivityMaps sens = make_sensitivities(cfg.coils, cfg.size, cfg.size);
    const SamplingMask mask = build_mask(cfg.size, cfg.accel, cfg.n_acs);
    std::vector<SamplePair> base;
    base.reserve(truths.size());
    for (const auto& t : truths) base.push_back(make_pair(t, sens, mask));
    return augment_pairs(base);
}

inline std::vector<RealImage> default_phantoms(const RunConfig& cfg) {
    std::vector<RealImage> out;
    for (int i = 0; i < cfg.n_phantoms; ++i)
        out.push_back(random_phantom(cfg.size, cfg.size, cfg.train.seed * 977 + i));
    return out;
}

struct AlphaResult {
    double alpha = 0;
    double heldout_mse = 0;
};

// Train one model per alpha at the given scale and rank by held-out MSE.
template <typename T>
std::vector<AlphaResult> alpha_sweep(const std::vector<double>& alphas, RunConfig cfg,
                                     int n_test = 4) {
    const auto truths = default_phantoms(cfg);
    const auto dataset = build_training_set(cfg, truths);
    const SensitivityMaps sens = make_sensitivities(cfg.coils, cfg.size, cfg.size);
    const SamplingMask mask = build_mask(cfg.size, cfg.accel, cfg.n_acs);

    std::vector<AlphaResult> results;
    for (double a : alphas) {
        RunConfig c = cfg;
        c.train.alpha = a;
        nn::RDUNet<T> net(c.net, c.train.seed);
        train_loop(dataset, net, c.train);

        double total = 0;
        for (int i = 0; i < n_test; ++i) {
            const RealImage truth =
                random_phantom(cfg.size, cfg.size, 50000 + cfg.train.seed * 131 + i);
            const CoilKSpace full = forward_acquire(truth, sens);
            const RealImage target = normalize(zero_filled_recon(full));
            const RealImage zf = normalize(zero_filled_recon(apply_mask(full, mask)));
            nn::Tensor4<T> x(1, 1, zf.ny, zf.nx);
            for (size_t j = 0; j < zf.size(); ++j) x.v[j] = static_cast<T>(zf.v[j]);
            const auto y = net.forward(x, nn::Mode::Eval);
            RealImage recon(zf.ny, zf.nx);
            for (size_t j = 0; j < recon.size(); ++j) recon.v[j] = static_cast<double>(y.v[j]);
            total += mse(target, normalize(recon));
        }
        results.push_back({a, total / n_test});
    }
    std::stable_sort(results.begin(), results.end(),
                     [](const AlphaResult& a, const AlphaResult& b) {
                         return a.heldout_mse < b.heldout_mse;
                     });
    return results;
}

} // namespace ksr
