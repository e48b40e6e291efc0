#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "ksr/fourier.hpp"
#include "ksr/image.hpp"

namespace ksr {

// Per-phase-encode-line Cartesian sampling pattern: uniform every-R-th line
// plus a centered fully sampled ACS block.
struct SamplingMask {
    std::vector<std::uint8_t> keep; // one flag per PE line
    int accel = 1;
    int n_acs = 0;

    int n_pe() const { return static_cast<int>(keep.size()); }
    int n_kept() const {
        int n = 0;
        for (auto k : keep) n += (k != 0);
        return n;
    }
};

inline SamplingMask build_mask(int n_pe, int R, int n_acs) {
    if (R < 1 || R > n_pe || n_acs < 0 || n_acs > n_pe)
        throw Error("InvalidMaskSpec");
    SamplingMask m;
    m.accel = R;
    m.n_acs = n_acs;
    m.keep.assign(n_pe, 0);
    const int start = n_pe / 2 - n_acs / 2;
    for (int i = 0; i < n_pe; ++i)
        m.keep[i] = (i % R == 0) || (i >= start && i < start + n_acs);
    return m;
}

// Complex coil sensitivity maps, normalized to unit root-sum-of-squares per pixel.
struct SensitivityMaps {
    int nc = 0;
    int ny = 0;
    int nx = 0;
    std::vector<std::complex<double>> v;

    std::complex<double>& at(int c, int y, int x) {
        return v[(static_cast<size_t>(c) * ny + y) * nx + x];
    }
    const std::complex<double>& at(int c, int y, int x) const {
        return v[(static_cast<size_t>(c) * ny + y) * nx + x];
    }
};

namespace detail {

struct Ellipse {
    double amp, a, b, x0, y0, phi_deg;
};

// Toft's modified Shepp-Logan table (intensities give an image in [0,1]).
inline const std::array<Ellipse, 10>& shepp_logan_table() {
    static const std::array<Ellipse, 10> tab = {{
        {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
        {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
        {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
        {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
        {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
        {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
        {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
        {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
        {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
        {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
    }};
    return tab;
}

inline RealImage render_ellipses(int ny, int nx, const std::vector<Ellipse>& ellipses) {
    RealImage img(ny, nx);
    for (int i = 0; i < ny; ++i) {
        const double y = (2.0 * i + 1.0 - ny) / ny;
        for (int j = 0; j < nx; ++j) {
            const double x = (2.0 * j + 1.0 - nx) / nx;
            double val = 0;
            for (const auto& e : ellipses) {
                const double phi = e.phi_deg * std::numbers::pi / 180.0;
                const double c = std::cos(phi), s = std::sin(phi);
                const double xr = c * (x - e.x0) + s * (y - e.y0);
                const double yr = -s * (x - e.x0) + c * (y - e.y0);
                if ((xr * xr) / (e.a * e.a) + (yr * yr) / (e.b * e.b) <= 1.0)
                    val += e.amp;
            }
            img.at(i, j) = std::clamp(val, 0.0, 1.0);
        }
    }
    return img;
}

} // namespace detail

inline RealImage shepp_logan(int ny, int nx) {
    if (ny < 8 || nx < 8) throw Error("TooSmall");
    const auto& tab = detail::shepp_logan_table();
    return detail::render_ellipses(ny, nx, {tab.begin(), tab.end()});
}

// Seeded jittered variant of the phantom; seed 0, 1, ... give distinct objects.
inline RealImage random_phantom(int ny, int nx, std::uint64_t seed) {
    if (ny < 8 || nx < 8) throw Error("TooSmall");
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<detail::Ellipse> tab(detail::shepp_logan_table().begin(),
                                     detail::shepp_logan_table().end());
    for (size_t i = 0; i < tab.size(); ++i) {
        auto& e = tab[i];
        e.x0 += 0.03 * u(rng);
        e.y0 += 0.03 * u(rng);
        e.a = std::clamp(e.a * (1.0 + 0.08 * u(rng)), 0.01, 0.93);
        e.b = std::clamp(e.b * (1.0 + 0.08 * u(rng)), 0.01, 0.93);
        e.phi_deg += 4.0 * u(rng);
        if (i >= 2) e.amp *= 1.0 + 0.2 * u(rng);
    }
    return detail::render_ellipses(ny, nx, tab);
}

// nc Gaussian-magnitude, linear-phase maps centered on a circle around the
// image; normalized so the per-pixel RSS is exactly 1.
inline SensitivityMaps make_sensitivities(int nc, int ny, int nx) {
    if (nc < 1 || ny < 1 || nx < 1) throw Error("ShapeMismatch");
    SensitivityMaps sens;
    sens.nc = nc;
    sens.ny = ny;
    sens.nx = nx;
    sens.v.resize(static_cast<size_t>(nc) * ny * nx);

    const double cy = 0.5 * (ny - 1), cx = 0.5 * (nx - 1);
    const double radius = 0.5 * std::min(ny, nx);
    const double sigma = 0.6 * std::min(ny, nx);

    for (int c = 0; c < nc; ++c) {
        const double theta = 2.0 * std::numbers::pi * c / nc;
        const double coil_y = cy + radius * std::sin(theta);
        const double coil_x = cx + radius * std::cos(theta);
        const double py = 0.25 * std::sin(theta); // cycles across the FOV
        const double px = 0.25 * std::cos(theta);
        for (int i = 0; i < ny; ++i) {
            for (int j = 0; j < nx; ++j) {
                const double dy = i - coil_y, dx = j - coil_x;
                const double mag = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                const double phase =
                    2.0 * std::numbers::pi *
                    (py * static_cast<double>(i) / ny + px * static_cast<double>(j) / nx);
                sens.at(c, i, j) = std::polar(mag, phase);
            }
        }
    }

    for (int i = 0; i < ny; ++i) {
        for (int j = 0; j < nx; ++j) {
            double rss = 0;
            for (int c = 0; c < nc; ++c) rss += std::norm(sens.at(c, i, j));
            const double inv = 1.0 / std::sqrt(rss);
            for (int c = 0; c < nc; ++c) sens.at(c, i, j) *= inv;
        }
    }
    return sens;
}

// Retrospective acquisition model: coil-weight the image, then transform
// each coil to k-space.
inline CoilKSpace forward_acquire(const RealImage& img, const SensitivityMaps& sens) {
    if (img.ny != sens.ny || img.nx != sens.nx) throw Error("ShapeMismatch");
    CoilKSpace ksp(sens.nc, sens.ny, sens.nx);
    for (int c = 0; c < sens.nc; ++c) {
        ComplexImage weighted(img.ny, img.nx);
        for (int i = 0; i < img.ny; ++i)
            for (int j = 0; j < img.nx; ++j)
                weighted.at(i, j) = sens.at(c, i, j) * img.at(i, j);
        ksp.set_coil(c, fft2c(weighted));
    }
    return ksp;
}

inline CoilKSpace apply_mask(const CoilKSpace& ksp, const SamplingMask& mask) {
    if (mask.n_pe() != ksp.ny) throw Error("ShapeMismatch");
    CoilKSpace out = ksp;
    for (int c = 0; c < ksp.nc; ++c)
        for (int y = 0; y < ksp.ny; ++y)
            if (!mask.keep[y])
                for (int x = 0; x < ksp.nx; ++x) out.at(c, y, x) = {0.0, 0.0};
    return out;
}

// Per-coil inverse transform followed by root-sum-of-squares combination.
inline RealImage zero_filled_recon(const CoilKSpace& ksp) {
    RealImage out(ksp.ny, ksp.nx);
    for (int c = 0; c < ksp.nc; ++c) {
        const ComplexImage img = ifft2c(ksp.coil(c));
        for (size_t i = 0; i < img.size(); ++i) out.v[i] += std::norm(img.v[i]);
    }
    for (auto& x : out.v) x = std::sqrt(x);
    return out;
}

} // namespace ksr
