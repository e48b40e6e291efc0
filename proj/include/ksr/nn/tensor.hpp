#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ksr/common.hpp"

namespace ksr::nn {

enum class Mode { Train, Eval };

// (batch, channel, height, width), row-major.
template <typename T>
struct Tensor4 {
    int b = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor4() = default;
    Tensor4(int b_, int c_, int h_, int w_)
        : b(b_), c(c_), h(h_), w(w_),
          v(static_cast<size_t>(b_) * c_ * h_ * w_, T(0)) {
        if (b_ < 1 || c_ < 1 || h_ < 1 || w_ < 1)
            throw Error("ShapeMismatch", "Tensor4 dims must be >= 1");
    }

    size_t size() const { return v.size(); }
    T& at(int bi, int ci, int y, int x) {
        return v[((static_cast<size_t>(bi) * c + ci) * h + y) * w + x];
    }
    const T& at(int bi, int ci, int y, int x) const {
        return v[((static_cast<size_t>(bi) * c + ci) * h + y) * w + x];
    }
    T* slice(int bi, int ci) { return v.data() + (static_cast<size_t>(bi) * c + ci) * h * w; }
    const T* slice(int bi, int ci) const {
        return v.data() + (static_cast<size_t>(bi) * c + ci) * h * w;
    }

    bool same_shape(const Tensor4& o) const {
        return b == o.b && c == o.c && h == o.h && w == o.w;
    }
};

template <typename T>
bool all_finite(const Tensor4<T>& t) {
    for (T x : t.v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

// A learnable array plus its gradient and SGD velocity.
template <typename T>
struct Param {
    std::string name;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<T> vel;
    bool has_grad = false;

    void resize(size_t n) {
        value.assign(n, T(0));
        grad.assign(n, T(0));
        vel.assign(n, T(0));
    }

    void fill(T x) { std::fill(value.begin(), value.end(), x); }

    void zero_grad() {
        std::fill(grad.begin(), grad.end(), T(0));
        has_grad = false;
    }

    template <typename Rng>
    void init_he(Rng& rng, int fan_in) {
        const double std = std::sqrt(2.0 / fan_in);
        std::normal_distribution<double> dist(0.0, std);
        for (auto& x : value) x = static_cast<T>(dist(rng));
    }
};

} // namespace ksr::nn
