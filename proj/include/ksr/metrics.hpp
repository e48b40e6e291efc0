#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ksr/grappa.hpp"
#include "ksr/simulate.hpp"
#include "ksr/train.hpp"

namespace ksr {

// Mean squared error: ||y - yhat||_F^2 / N.
inline double mse(const RealImage& y, const RealImage& yhat) {
    if (!y.same_shape(yhat)) throw Error("ShapeMismatch");
    double s = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        const double d = y.v[i] - yhat.v[i];
        s += d * d;
    }
    return s / static_cast<double>(y.size());
}

struct MethodStats {
    double mse_mean = 0;
    double mse_std = 0;
    int n_trials = 0;
};

using EvalReport = std::map<std::string, MethodStats>;

// A reconstruction method: masked coil k-space + mask -> image. The harness
// normalizes both the output and the ground truth before scoring.
using ReconMethod =
    std::function<RealImage(const CoilKSpace& masked, const SamplingMask& mask)>;

struct EvalSetup {
    int n_images = 8;
    int ny = 64, nx = 64;
    int nc = 8;
    int R = 4;
    int n_acs = 16;
    std::uint64_t phantom_base = 1000; // offset so test phantoms differ from training
};

// Per seed, build a fresh test set of jittered phantoms, run every method on
// identical masked inputs, and report mean/std of the per-seed mean MSE.
inline EvalReport evaluate_methods(
    const EvalSetup& setup,
    const std::vector<std::pair<std::string, ReconMethod>>& methods,
    const std::vector<std::uint64_t>& seeds) {
    for (const auto& [name, fn] : methods)
        if (!fn) throw Error("MissingModel", name);

    const SensitivityMaps sens = make_sensitivities(setup.nc, setup.ny, setup.nx);
    const SamplingMask mask = build_mask(setup.ny, setup.R, setup.n_acs);

    std::map<std::string, std::vector<double>> per_seed;
    for (std::uint64_t seed : seeds) {
        std::map<std::string, double> acc;
        for (int i = 0; i < setup.n_images; ++i) {
            const RealImage truth = random_phantom(
                setup.ny, setup.nx, setup.phantom_base + seed * 131 + i);
            const CoilKSpace full = forward_acquire(truth, sens);
            const RealImage target = normalize(zero_filled_recon(full));
            const CoilKSpace masked = apply_mask(full, mask);
            for (const auto& [name, fn] : methods)
                acc[name] += mse(target, normalize(fn(masked, mask)));
        }
        for (const auto& [name, s] : acc) per_seed[name].push_back(s / setup.n_images);
    }

    EvalReport rep;
    for (const auto& [name, xs] : per_seed) {
        MethodStats st;
        st.n_trials = static_cast<int>(xs.size());
        for (double x : xs) st.mse_mean += x;
        st.mse_mean /= st.n_trials;
        double var = 0;
        for (double x : xs) var += (x - st.mse_mean) * (x - st.mse_mean);
        st.mse_std = st.n_trials > 1 ? std::sqrt(var / st.n_trials) : 0.0;
        rep[name] = st;
    }
    return rep;
}

// Convenience baselines for the harness.
inline ReconMethod method_zero_fill() {
    return [](const CoilKSpace& masked, const SamplingMask&) {
        return zero_filled_recon(masked);
    };
}

inline ReconMethod method_grappa(int n_src_lines = 4, int kx = 5, double lambda = -1.0) {
    return [=](const CoilKSpace& masked, const SamplingMask& mask) {
        const int start = mask.n_pe() / 2 - mask.n_acs / 2;
        CoilKSpace acs(masked.nc, mask.n_acs, masked.nx);
        for (int c = 0; c < masked.nc; ++c)
            for (int y = 0; y < mask.n_acs; ++y)
                for (int x = 0; x < masked.nx; ++x)
                    acs.at(c, y, x) = masked.at(c, start + y, x);
        const GrappaKernel kern = calibrate(acs, mask.accel, n_src_lines, kx, lambda);
        return grappa_reconstruct(masked, mask, kern);
    };
}

template <typename T>
ReconMethod method_net(std::shared_ptr<nn::RDUNet<T>> net) {
    if (!net) throw Error("MissingModel");
    return [net](const CoilKSpace& masked, const SamplingMask&) {
        const RealImage zf = normalize(zero_filled_recon(masked));
        nn::Tensor4<T> x(1, 1, zf.ny, zf.nx);
        for (size_t i = 0; i < zf.size(); ++i) x.v[i] = static_cast<T>(zf.v[i]);
        const auto y = net->forward(x, nn::Mode::Eval);
        RealImage out(zf.ny, zf.nx);
        for (size_t i = 0; i < out.size(); ++i) out.v[i] = static_cast<double>(y.v[i]);
        return out;
    };
}

} // namespace ksr
