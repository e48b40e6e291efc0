#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ksr/nn/tensor.hpp"

namespace ksr::nn {

// 2D cross-correlation, stride 1, zero padding k/2 (shape preserving).
// Kernel size 3 for body convolutions, 1 for the channel-mapping head.
template <typename T>
struct Conv2d {
    int c_in = 0, c_out = 0, k = 3;
    Param<T> weight; // (c_out, c_in, k, k)
    Param<T> bias;   // (c_out)
    Tensor4<T> cache_x;
    bool has_cache = false;

    Conv2d() = default;
    Conv2d(int c_in_, int c_out_, int k_, const std::string& name)
        : c_in(c_in_), c_out(c_out_), k(k_) {
        weight.name = name + ".weight";
        bias.name = name + ".bias";
        weight.resize(static_cast<size_t>(c_out) * c_in * k * k);
        bias.resize(c_out);
    }

    template <typename Rng>
    void init(Rng& rng) {
        weight.init_he(rng, c_in * k * k);
    }

    Tensor4<T> forward(const Tensor4<T>& x) {
        if (x.c != c_in) throw Error("ShapeMismatch", "conv channel mismatch");
        cache_x = x;
        has_cache = true;
        const int p = k / 2;
        Tensor4<T> out(x.b, c_out, x.h, x.w);
#pragma omp parallel for collapse(2) schedule(static)
        for (int bi = 0; bi < x.b; ++bi) {
            for (int co = 0; co < c_out; ++co) {
                T* o = out.slice(bi, co);
                for (size_t i = 0; i < static_cast<size_t>(x.h) * x.w; ++i)
                    o[i] = bias.value[co];
                for (int ci = 0; ci < c_in; ++ci) {
                    const T* xin = x.slice(bi, ci);
                    const T* wk = &weight.value[((static_cast<size_t>(co) * c_in + ci) * k) * k];
                    for (int dy = 0; dy < k; ++dy) {
                        for (int dx = 0; dx < k; ++dx) {
                            const T wv = wk[dy * k + dx];
                            const int y0 = std::max(0, p - dy), y1 = std::min(x.h, x.h + p - dy);
                            const int x0 = std::max(0, p - dx), x1 = std::min(x.w, x.w + p - dx);
                            for (int y = y0; y < y1; ++y) {
                                const T* row = xin + static_cast<size_t>(y + dy - p) * x.w + (dx - p);
                                T* orow = o + static_cast<size_t>(y) * x.w;
                                for (int xx = x0; xx < x1; ++xx) orow[xx] += wv * row[xx];
                            }
                        }
                    }
                }
            }
        }
        return out;
    }

    Tensor4<T> backward(const Tensor4<T>& gout) {
        if (!has_cache) throw Error("BackwardBeforeForward");
        const Tensor4<T>& x = cache_x;
        if (gout.b != x.b || gout.c != c_out || gout.h != x.h || gout.w != x.w)
            throw Error("ShapeMismatch", "conv backward grad shape");
        const int p = k / 2;

#pragma omp parallel for schedule(static)
        for (int co = 0; co < c_out; ++co) {
            T db(0);
            for (int bi = 0; bi < x.b; ++bi) {
                const T* g = gout.slice(bi, co);
                for (size_t i = 0; i < static_cast<size_t>(x.h) * x.w; ++i) db += g[i];
            }
            bias.grad[co] += db;
            for (int ci = 0; ci < c_in; ++ci) {
                T* wg = &weight.grad[((static_cast<size_t>(co) * c_in + ci) * k) * k];
                for (int dy = 0; dy < k; ++dy) {
                    for (int dx = 0; dx < k; ++dx) {
                        T acc(0);
                        for (int bi = 0; bi < x.b; ++bi) {
                            const T* g = gout.slice(bi, co);
                            const T* xin = x.slice(bi, ci);
                            const int y0 = std::max(0, p - dy), y1 = std::min(x.h, x.h + p - dy);
                            const int x0 = std::max(0, p - dx), x1 = std::min(x.w, x.w + p - dx);
                            for (int y = y0; y < y1; ++y) {
                                const T* row = xin + static_cast<size_t>(y + dy - p) * x.w + (dx - p);
                                const T* grow = g + static_cast<size_t>(y) * x.w;
                                for (int xx = x0; xx < x1; ++xx) acc += grow[xx] * row[xx];
                            }
                        }
                        wg[dy * k + dx] += acc;
                    }
                }
            }
        }
        weight.has_grad = true;
        bias.has_grad = true;

        Tensor4<T> gin(x.b, c_in, x.h, x.w);
#pragma omp parallel for collapse(2) schedule(static)
        for (int bi = 0; bi < x.b; ++bi) {
            for (int ci = 0; ci < c_in; ++ci) {
                T* gi = gin.slice(bi, ci);
                for (int co = 0; co < c_out; ++co) {
                    const T* g = gout.slice(bi, co);
                    const T* wk = &weight.value[((static_cast<size_t>(co) * c_in + ci) * k) * k];
                    for (int dy = 0; dy < k; ++dy) {
                        for (int dx = 0; dx < k; ++dx) {
                            const T wv = wk[dy * k + dx];
                            // gin(y,x) += gout(y - dy + p, x - dx + p) * w
                            const int y0 = std::max(0, dy - p), y1 = std::min(x.h, x.h + dy - p);
                            const int x0 = std::max(0, dx - p), x1 = std::min(x.w, x.w + dx - p);
                            for (int y = y0; y < y1; ++y) {
                                const T* grow = g + static_cast<size_t>(y - dy + p) * x.w + (p - dx);
                                T* girow = gi + static_cast<size_t>(y) * x.w;
                                for (int xx = x0; xx < x1; ++xx) girow[xx] += wv * grow[xx];
                            }
                        }
                    }
                }
            }
        }
        has_cache = false;
        cache_x = Tensor4<T>();
        return gin;
    }
};

// Per-channel batch normalization with affine parameters and running stats.
template <typename T>
struct BatchNorm2d {
    int channels = 0;
    T eps = T(1e-5);
    T momentum = T(0.1);
    Param<T> gamma, beta;
    std::vector<T> running_mean, running_var;

    // backward caches
    Tensor4<T> cache_xhat;
    std::vector<T> cache_invstd;
    Mode cache_mode = Mode::Train;
    bool has_cache = false;

    BatchNorm2d() = default;
    BatchNorm2d(int channels_, const std::string& name) : channels(channels_) {
        gamma.name = name + ".gamma";
        beta.name = name + ".beta";
        gamma.resize(channels);
        beta.resize(channels);
        gamma.fill(T(1));
        running_mean.assign(channels, T(0));
        running_var.assign(channels, T(1));
    }

    Tensor4<T> forward(const Tensor4<T>& x, Mode mode) {
        if (x.c != channels) throw Error("ShapeMismatch", "batchnorm channel mismatch");
        const size_t m = static_cast<size_t>(x.b) * x.h * x.w;
        if (mode == Mode::Train && m < 2) throw Error("DegenerateBatch");

        Tensor4<T> out(x.b, x.c, x.h, x.w);
        cache_xhat = Tensor4<T>(x.b, x.c, x.h, x.w);
        cache_invstd.assign(channels, T(0));
        cache_mode = mode;

        for (int ci = 0; ci < channels; ++ci) {
            T mean, var;
            if (mode == Mode::Train) {
                T s(0);
                for (int bi = 0; bi < x.b; ++bi) {
                    const T* p = x.slice(bi, ci);
                    for (size_t i = 0; i < static_cast<size_t>(x.h) * x.w; ++i) s += p[i];
                }
                mean = s / static_cast<T>(m);
                T sv(0);
                for (int bi = 0; bi < x.b; ++bi) {
                    const T* p = x.slice(bi, ci);
                    for (size_t i = 0; i < static_cast<size_t>(x.h) * x.w; ++i) {
                        const T d = p[i] - mean;
                        sv += d * d;
                    }
                }
                var = sv / static_cast<T>(m);
                running_mean[ci] = (T(1) - momentum) * running_mean[ci] + momentum * mean;
                const T var_unbiased = sv / static_cast<T>(m - 1);
                running_var[ci] = (T(1) - momentum) * running_var[ci] + momentum * var_unbiased;
            } else {
                mean = running_mean[ci];
                var = running_var[ci];
            }
            const T invstd = T(1) / std::sqrt(var + eps);
            cache_invstd[ci] = invstd;
            for (int bi = 0; bi < x.b; ++bi) {
                const T* p = x.slice(bi, ci);
                T* xh = cache_xhat.slice(bi, ci);
                T* o = out.slice(bi, ci);
                for (size_t i = 0; i < static_cast<size_t>(x.h) * x.w; ++i) {
                    xh[i] = (p[i] - mean) * invstd;
                    o[i] = gamma.value[ci] * xh[i] + beta.value[ci];
                }
            }
        }
        has_cache = true;
        return out;
    }

    Tensor4<T> backward(const Tensor4<T>& gout) {
        if (!has_cache) throw Error("BackwardBeforeForward");
        if (!gout.same_shape(cache_xhat)) throw Error("ShapeMismatch", "batchnorm backward grad shape");
        const size_t m = static_cast<size_t>(gout.b) * gout.h * gout.w;
        Tensor4<T> gin(gout.b, gout.c, gout.h, gout.w);

        for (int ci = 0; ci < channels; ++ci) {
            T sum_g(0), sum_gx(0);
            for (int bi = 0; bi < gout.b; ++bi) {
                const T* g = gout.slice(bi, ci);
                const T* xh = cache_xhat.slice(bi, ci);
                for (size_t i = 0; i < static_cast<size_t>(gout.h) * gout.w; ++i) {
                    sum_g += g[i];
                    sum_gx += g[i] * xh[i];
                }
            }
            gamma.grad[ci] += sum_gx;
            beta.grad[ci] += sum_g;

            const T gs = gamma.value[ci] * cache_invstd[ci];
            for (int bi = 0; bi < gout.b; ++bi) {
                const T* g = gout.slice(bi, ci);
                const T* xh = cache_xhat.slice(bi, ci);
                T* gi = gin.slice(bi, ci);
                for (size_t i = 0; i < static_cast<size_t>(gout.h) * gout.w; ++i) {
                    if (cache_mode == Mode::Train) {
                        gi[i] = gs * (g[i] - sum_g / static_cast<T>(m) -
                                      xh[i] * sum_gx / static_cast<T>(m));
                    } else {
                        gi[i] = gs * g[i];
                    }
                }
            }
        }
        gamma.has_grad = true;
        beta.has_grad = true;
        has_cache = false;
        cache_xhat = Tensor4<T>();
        return gin;
    }
};

enum class ActKind { PoLU, ReLU };

// PoLU: v for v >= 0, (1-v)^(-n) - 1 for v < 0 (continuous, bounded below by -1
// for n = 1); ReLU available as a fallback.
template <typename T>
struct Activation {
    ActKind kind = ActKind::PoLU;
    T n = T(1);
    Tensor4<T> cache_x;
    bool has_cache = false;

    Tensor4<T> forward(const Tensor4<T>& x) {
        cache_x = x;
        has_cache = true;
        Tensor4<T> out = x;
        if (kind == ActKind::PoLU) {
            for (auto& v : out.v)
                if (v < T(0)) v = std::pow(T(1) - v, -n) - T(1);
        } else {
            for (auto& v : out.v)
                if (v < T(0)) v = T(0);
        }
        return out;
    }

    Tensor4<T> backward(const Tensor4<T>& gout) {
        if (!has_cache) throw Error("BackwardBeforeForward");
        if (!gout.same_shape(cache_x)) throw Error("ShapeMismatch");
        Tensor4<T> gin = gout;
        if (kind == ActKind::PoLU) {
            for (size_t i = 0; i < gin.size(); ++i) {
                const T v = cache_x.v[i];
                if (v < T(0)) gin.v[i] *= n * std::pow(T(1) - v, -n - T(1));
            }
        } else {
            for (size_t i = 0; i < gin.size(); ++i)
                if (cache_x.v[i] < T(0)) gin.v[i] = T(0);
        }
        has_cache = false;
        cache_x = Tensor4<T>();
        return gin;
    }
};

// 2x2 max pooling with stride 2; gradient routes to the argmax, ties broken by
// first position in row-major order.
template <typename T>
struct MaxPool2 {
    int in_h = 0, in_w = 0, in_b = 0, in_c = 0;
    std::vector<int> cache_arg; // flat offset into the input slice per output element
    bool has_cache = false;

    Tensor4<T> forward(const Tensor4<T>& x) {
        if (x.h % 2 != 0 || x.w % 2 != 0) throw Error("ShapeMismatch", "maxpool needs even h,w");
        in_b = x.b;
        in_c = x.c;
        in_h = x.h;
        in_w = x.w;
        Tensor4<T> out(x.b, x.c, x.h / 2, x.w / 2);
        cache_arg.assign(out.size(), 0);
        size_t oi = 0;
        for (int bi = 0; bi < x.b; ++bi) {
            for (int ci = 0; ci < x.c; ++ci) {
                const T* p = x.slice(bi, ci);
                for (int y = 0; y < x.h; y += 2) {
                    for (int xx = 0; xx < x.w; xx += 2, ++oi) {
                        int best = y * x.w + xx;
                        T bv = p[best];
                        const int cand[3] = {y * x.w + xx + 1, (y + 1) * x.w + xx,
                                             (y + 1) * x.w + xx + 1};
                        for (int cidx : cand) {
                            if (p[cidx] > bv) {
                                bv = p[cidx];
                                best = cidx;
                            }
                        }
                        out.v[oi] = bv;
                        cache_arg[oi] = best;
                    }
                }
            }
        }
        has_cache = true;
        return out;
    }

    Tensor4<T> backward(const Tensor4<T>& gout) {
        if (!has_cache) throw Error("BackwardBeforeForward");
        if (gout.b != in_b || gout.c != in_c || gout.h != in_h / 2 || gout.w != in_w / 2)
            throw Error("ShapeMismatch");
        Tensor4<T> gin(in_b, in_c, in_h, in_w);
        size_t oi = 0;
        for (int bi = 0; bi < in_b; ++bi)
            for (int ci = 0; ci < in_c; ++ci) {
                T* gi = gin.slice(bi, ci);
                for (int y = 0; y < in_h / 2; ++y)
                    for (int xx = 0; xx < in_w / 2; ++xx, ++oi)
                        gi[cache_arg[oi]] += gout.v[oi];
            }
        has_cache = false;
        return gin;
    }
};

// Transposed 2x2 convolution with stride 2: doubles h,w, halves channels.
template <typename T>
struct Deconv2 {
    int c_in = 0, c_out = 0;
    Param<T> weight; // (c_in, c_out, 2, 2)
    Param<T> bias;   // (c_out)
    Tensor4<T> cache_x;
    bool has_cache = false;

    Deconv2() = default;
    Deconv2(int c_in_, const std::string& name) : c_in(c_in_), c_out(c_in_ / 2) {
        if (c_in_ % 2 != 0) throw Error("ShapeMismatch", "deconv needs even c_in");
        weight.name = name + ".weight";
        bias.name = name + ".bias";
        weight.resize(static_cast<size_t>(c_in) * c_out * 4);
        bias.resize(c_out);
    }

    template <typename Rng>
    void init(Rng& rng) {
        weight.init_he(rng, c_in);
    }

    Tensor4<T> forward(const Tensor4<T>& x) {
        if (x.c != c_in) throw Error("ShapeMismatch", "deconv channel mismatch");
        cache_x = x;
        has_cache = true;
        Tensor4<T> out(x.b, c_out, x.h * 2, x.w * 2);
        for (int bi = 0; bi < x.b; ++bi) {
            for (int co = 0; co < c_out; ++co) {
                T* o = out.slice(bi, co);
                for (size_t i = 0; i < out.size() / (static_cast<size_t>(out.b) * out.c); ++i)
                    o[i] = bias.value[co];
                for (int ci = 0; ci < c_in; ++ci) {
                    const T* xin = x.slice(bi, ci);
                    const T* wk = &weight.value[(static_cast<size_t>(ci) * c_out + co) * 4];
                    for (int y = 0; y < x.h; ++y)
                        for (int xx = 0; xx < x.w; ++xx) {
                            const T v = xin[y * x.w + xx];
                            T* base = o + static_cast<size_t>(2 * y) * out.w + 2 * xx;
                            base[0] += wk[0] * v;
                            base[1] += wk[1] * v;
                            base[out.w] += wk[2] * v;
                            base[out.w + 1] += wk[3] * v;
                        }
                }
            }
        }
        return out;
    }

    Tensor4<T> backward(const Tensor4<T>& gout) {
        if (!has_cache) throw Error("BackwardBeforeForward");
        const Tensor4<T>& x = cache_x;
        if (gout.b != x.b || gout.c != c_out || gout.h != x.h * 2 || gout.w != x.w * 2)
            throw Error("ShapeMismatch");
        Tensor4<T> gin(x.b, c_in, x.h, x.w);
        for (int co = 0; co < c_out; ++co) {
            T db(0);
            for (int bi = 0; bi < x.b; ++bi) {
                const T* g = gout.slice(bi, co);
                for (size_t i = 0; i < static_cast<size_t>(gout.h) * gout.w; ++i) db += g[i];
            }
            bias.grad[co] += db;
        }
        for (int bi = 0; bi < x.b; ++bi) {
            for (int ci = 0; ci < c_in; ++ci) {
                const T* xin = x.slice(bi, ci);
                T* gi = gin.slice(bi, ci);
                for (int co = 0; co < c_out; ++co) {
                    const T* g = gout.slice(bi, co);
                    const T* wk = &weight.value[(static_cast<size_t>(ci) * c_out + co) * 4];
                    T* wg = &weight.grad[(static_cast<size_t>(ci) * c_out + co) * 4];
                    for (int y = 0; y < x.h; ++y)
                        for (int xx = 0; xx < x.w; ++xx) {
                            const T* gb = g + static_cast<size_t>(2 * y) * gout.w + 2 * xx;
                            const T v = xin[y * x.w + xx];
                            wg[0] += gb[0] * v;
                            wg[1] += gb[1] * v;
                            wg[2] += gb[gout.w] * v;
                            wg[3] += gb[gout.w + 1] * v;
                            gi[y * x.w + xx] += wk[0] * gb[0] + wk[1] * gb[1] +
                                                wk[2] * gb[gout.w] + wk[3] * gb[gout.w + 1];
                        }
                }
            }
        }
        weight.has_grad = true;
        bias.has_grad = true;
        has_cache = false;
        cache_x = Tensor4<T>();
        return gin;
    }
};

// Channel concatenation, a-then-b.
template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
    if (a.b != b.b || a.h != b.h || a.w != b.w) throw Error("ShapeMismatch");
    Tensor4<T> out(a.b, a.c + b.c, a.h, a.w);
    const size_t plane = static_cast<size_t>(a.h) * a.w;
    for (int bi = 0; bi < a.b; ++bi) {
        for (int ci = 0; ci < a.c; ++ci)
            std::copy(a.slice(bi, ci), a.slice(bi, ci) + plane, out.slice(bi, ci));
        for (int ci = 0; ci < b.c; ++ci)
            std::copy(b.slice(bi, ci), b.slice(bi, ci) + plane, out.slice(bi, a.c + ci));
    }
    return out;
}

// Exact adjoint of concat_channels: split the gradient back to both inputs.
template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& g, int ca, int cb) {
    if (g.c != ca + cb) throw Error("ShapeMismatch");
    Tensor4<T> ga(g.b, ca, g.h, g.w), gb(g.b, cb, g.h, g.w);
    const size_t plane = static_cast<size_t>(g.h) * g.w;
    for (int bi = 0; bi < g.b; ++bi) {
        for (int ci = 0; ci < ca; ++ci)
            std::copy(g.slice(bi, ci), g.slice(bi, ci) + plane, ga.slice(bi, ci));
        for (int ci = 0; ci < cb; ++ci)
            std::copy(g.slice(bi, ca + ci), g.slice(bi, ca + ci) + plane, gb.slice(bi, ci));
    }
    return {std::move(ga), std::move(gb)};
}

} // namespace ksr::nn
