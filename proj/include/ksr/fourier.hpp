#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <vector>

#include "ksr/image.hpp"

namespace ksr {
namespace detail {

// FFTW planning is not thread safe; execution is.
inline std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

// out[(y+sy) % ny][(x+sx) % nx] = in[y][x]
inline void roll2(const std::complex<double>* in, std::complex<double>* out,
                  int ny, int nx, int sy, int sx) {
    for (int y = 0; y < ny; ++y) {
        const int yo = (y + sy) % ny;
        for (int x = 0; x < nx; ++x) {
            const int xo = (x + sx) % nx;
            out[static_cast<size_t>(yo) * nx + xo] = in[static_cast<size_t>(y) * nx + x];
        }
    }
}

inline ComplexImage fft2_centered(const ComplexImage& img, int sign) {
    if (!all_finite(img)) throw Error("NonFiniteInput");
    const int ny = img.ny, nx = img.nx;
    const size_t n = img.size();

    // ifftshift: roll by +ceil(n/2); fftshift: roll by +floor(n/2).
    std::vector<std::complex<double>> buf(n), tr(n);
    roll2(img.v.data(), buf.data(), ny, nx, ny - ny / 2, nx - nx / 2);

    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        plan = fftw_plan_dft_2d(ny, nx,
                                reinterpret_cast<fftw_complex*>(buf.data()),
                                reinterpret_cast<fftw_complex*>(tr.data()),
                                sign, FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(plan);
    }

    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& z : tr) z *= scale;

    ComplexImage res(ny, nx);
    roll2(tr.data(), res.v.data(), ny, nx, ny / 2, nx / 2);
    return res;
}

} // namespace detail

// Centered unitary 2D DFT: DC lands at (ny/2, nx/2); Parseval holds exactly.
inline ComplexImage fft2c(const ComplexImage& img) {
    return detail::fft2_centered(img, FFTW_FORWARD);
}

inline ComplexImage ifft2c(const ComplexImage& ksp) {
    return detail::fft2_centered(ksp, FFTW_BACKWARD);
}

inline ComplexImage to_complex(const RealImage& img) {
    ComplexImage out(img.ny, img.nx);
    for (size_t i = 0; i < img.size(); ++i) out.v[i] = {img.v[i], 0.0};
    return out;
}

inline ComplexImage fft2c(const RealImage& img) { return fft2c(to_complex(img)); }

} // namespace ksr
