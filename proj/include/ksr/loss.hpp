#pragma once

#include "ksr/fourier.hpp"
#include "ksr/nn/tensor.hpp"

namespace ksr {

// Decomposed training objective: total = l2_term + alpha * fourier_term.
struct LossReport {
    double total = 0;
    double l2_term = 0;
    double fourier_term = 0;
    double alpha = 0;
};

namespace detail {

inline ComplexImage slice_to_complex(const nn::Tensor4<double>& t, int bi) {
    ComplexImage out(t.h, t.w);
    const double* p = t.slice(bi, 0);
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = {p[i], 0.0};
    return out;
}

template <typename T>
nn::Tensor4<double> to_double(const nn::Tensor4<T>& t) {
    nn::Tensor4<double> out(t.b, t.c, t.h, t.w);
    for (size_t i = 0; i < t.size(); ++i) out.v[i] = static_cast<double>(t.v[i]);
    return out;
}

inline double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

} // namespace detail

// Mean-per-pixel L2 term plus an L1 penalty on the frequency-domain
// difference, taken separably over real and imaginary parts.
template <typename T>
LossReport loss_forward(const nn::Tensor4<T>& pred, const nn::Tensor4<T>& target, double alpha) {
    if (!pred.same_shape(target) || pred.c != 1) throw Error("ShapeMismatch");
    const auto p = detail::to_double(pred);
    const auto t = detail::to_double(target);
    const double n_norm = static_cast<double>(pred.b) * pred.h * pred.w;

    LossReport rep;
    rep.alpha = alpha;
    for (size_t i = 0; i < p.size(); ++i) {
        const double d = t.v[i] - p.v[i];
        rep.l2_term += d * d;
    }
    rep.l2_term /= n_norm;

    for (int bi = 0; bi < pred.b; ++bi) {
        ComplexImage diff(pred.h, pred.w);
        const double* pp = p.slice(bi, 0);
        const double* tp = t.slice(bi, 0);
        for (size_t i = 0; i < diff.size(); ++i) diff.v[i] = {tp[i] - pp[i], 0.0};
        const ComplexImage fd = fft2c(diff); // F(y) - F(yhat), by linearity
        for (const auto& z : fd.v)
            rep.fourier_term += std::abs(z.real()) + std::abs(z.imag());
    }
    rep.fourier_term /= n_norm;

    rep.total = rep.l2_term + alpha * rep.fourier_term;
    return rep;
}

// Gradient of loss_forward w.r.t. pred; sign(0) = 0.
template <typename T>
nn::Tensor4<T> loss_backward(const nn::Tensor4<T>& pred, const nn::Tensor4<T>& target,
                             double alpha) {
    if (!pred.same_shape(target) || pred.c != 1) throw Error("ShapeMismatch");
    const auto p = detail::to_double(pred);
    const auto t = detail::to_double(target);
    const double n_norm = static_cast<double>(pred.b) * pred.h * pred.w;

    nn::Tensor4<double> grad(pred.b, pred.c, pred.h, pred.w);
    for (size_t i = 0; i < p.size(); ++i)
        grad.v[i] = 2.0 / n_norm * (p.v[i] - t.v[i]);

    if (alpha != 0.0) {
        for (int bi = 0; bi < pred.b; ++bi) {
            ComplexImage diff(pred.h, pred.w);
            const double* pp = p.slice(bi, 0);
            const double* tp = t.slice(bi, 0);
            for (size_t i = 0; i < diff.size(); ++i) diff.v[i] = {tp[i] - pp[i], 0.0};
            ComplexImage fd = fft2c(diff);
            for (auto& z : fd.v)
                z = {detail::sgn(z.real()), detail::sgn(z.imag())};
            // adjoint of the unitary transform is its inverse
            const ComplexImage adj = ifft2c(fd);
            double* g = grad.slice(bi, 0);
            for (size_t i = 0; i < adj.size(); ++i)
                g[i] -= alpha / n_norm * adj.v[i].real();
        }
    }

    nn::Tensor4<T> out(pred.b, pred.c, pred.h, pred.w);
    for (size_t i = 0; i < grad.size(); ++i) out.v[i] = static_cast<T>(grad.v[i]);
    return out;
}

} // namespace ksr
