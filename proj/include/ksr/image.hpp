#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "ksr/common.hpp"

namespace ksr {

// Dense row-major 2D grid. Row index is the phase-encode direction (y),
// column index the frequency-encode direction (x).
template <typename T>
struct Grid2 {
    int ny = 0;
    int nx = 0;
    std::vector<T> v;

    Grid2() = default;
    Grid2(int ny_, int nx_, T fill = T{})
        : ny(ny_), nx(nx_), v(static_cast<size_t>(ny_) * nx_, fill) {
        if (ny_ < 1 || nx_ < 1) throw Error("ShapeMismatch", "Grid2 dims must be >= 1");
    }

    T& at(int y, int x) { return v[static_cast<size_t>(y) * nx + x]; }
    const T& at(int y, int x) const { return v[static_cast<size_t>(y) * nx + x]; }
    size_t size() const { return v.size(); }

    bool same_shape(const Grid2& o) const { return ny == o.ny && nx == o.nx; }

    friend bool operator==(const Grid2& a, const Grid2& b) {
        return a.ny == b.ny && a.nx == b.nx && a.v == b.v;
    }
};

using RealImage = Grid2<double>;
using ComplexImage = Grid2<std::complex<double>>;

// Multi-coil k-space (or multi-coil image stack), coil-major row-major.
struct CoilKSpace {
    int nc = 0;
    int ny = 0;
    int nx = 0;
    std::vector<std::complex<double>> v;

    CoilKSpace() = default;
    CoilKSpace(int nc_, int ny_, int nx_)
        : nc(nc_), ny(ny_), nx(nx_),
          v(static_cast<size_t>(nc_) * ny_ * nx_, std::complex<double>{}) {
        if (nc_ < 1 || ny_ < 1 || nx_ < 1) throw Error("ShapeMismatch", "CoilKSpace dims must be >= 1");
    }

    std::complex<double>& at(int c, int y, int x) {
        return v[(static_cast<size_t>(c) * ny + y) * nx + x];
    }
    const std::complex<double>& at(int c, int y, int x) const {
        return v[(static_cast<size_t>(c) * ny + y) * nx + x];
    }

    ComplexImage coil(int c) const {
        ComplexImage out(ny, nx);
        const size_t off = static_cast<size_t>(c) * ny * nx;
        std::copy(v.begin() + off, v.begin() + off + static_cast<size_t>(ny) * nx, out.v.begin());
        return out;
    }

    void set_coil(int c, const ComplexImage& img) {
        const size_t off = static_cast<size_t>(c) * ny * nx;
        std::copy(img.v.begin(), img.v.end(), v.begin() + off);
    }
};

inline bool all_finite(const RealImage& img) {
    for (double x : img.v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const ComplexImage& img) {
    for (const auto& z : img.v)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

inline double norm2(const ComplexImage& img) {
    double s = 0;
    for (const auto& z : img.v) s += std::norm(z);
    return std::sqrt(s);
}

inline double norm2(const RealImage& img) {
    double s = 0;
    for (double x : img.v) s += x * x;
    return std::sqrt(s);
}

} // namespace ksr
