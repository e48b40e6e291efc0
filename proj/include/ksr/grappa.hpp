#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

#include "ksr/simulate.hpp"

namespace ksr {

// Interpolation weights for filling missing PE lines: one weight block per
// missing-line offset r in {1..R-1}. Each block maps the stacked source
// neighborhood (nc coils x n_src_lines sampled lines x kx columns) to the
// nc target-coil samples at the missing position.
struct GrappaKernel {
    int R = 0;
    int nc = 0;
    int n_src_lines = 0;
    int kx = 0;
    double lambda = 0.0;
    // weights[r-1] is (n_features x nc), column = target coil.
    std::vector<Eigen::MatrixXcd> weights;

    int n_features() const { return nc * n_src_lines * kx; }
};

namespace detail {

// Source-line offsets relative to the sampled line just below the target:
// {-(h-1)R, ..., 0, R, ..., (n_src-h)R} with h = n_src/2.
inline std::vector<int> grappa_line_offsets(int n_src, int R) {
    std::vector<int> off(n_src);
    const int h = n_src / 2;
    for (int j = 0; j < n_src; ++j) off[j] = (j - (h - 1)) * R;
    return off;
}

// min ||A W - B||^2 + lambda ||W||^2 via the normal equations. lambda = 0
// requires full column rank.
inline Eigen::MatrixXcd ridge_solve(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B,
                                    double lambda) {
    const Eigen::Index nf = A.cols();
    if (lambda == 0.0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(A);
        if (qr.rank() < nf) throw Error("SingularCalibration");
    }
    const Eigen::MatrixXcd G =
        A.adjoint() * A + lambda * Eigen::MatrixXcd::Identity(nf, nf);
    Eigen::MatrixXcd W = G.ldlt().solve(A.adjoint() * B);
    if (!W.allFinite()) throw Error("SingularCalibration");
    return W;
}

} // namespace detail

// Calibrate on a fully sampled ACS region: for each offset r, ridge-solve
// min ||A w - b||^2 + lambda ||w||^2 over all sliding windows (circular wrap
// in the column direction). lambda < 0 selects 1e-4 * mean(diag(A^H A)).
inline GrappaKernel calibrate(const CoilKSpace& acs, int R, int n_src_lines = 4,
                              int kx = 5, double lambda = -1.0) {
    if (acs.nc < 2) throw Error("NeedMultipleCoils");
    if (R < 2) throw Error("InvalidMaskSpec", "GRAPPA needs R >= 2");
    const int span = (n_src_lines - 1) * R + 1;
    const int n_row_pos = acs.ny - span + 1;
    const long n_windows = static_cast<long>(n_row_pos) * acs.nx;
    if (n_row_pos < 1 || n_windows < 16)
        throw Error("InsufficientCalibration");

    const int nc = acs.nc;
    const int nf = nc * n_src_lines * kx;
    const int base_off = (n_src_lines / 2 - 1) * R; // first-source -> base line

    Eigen::MatrixXcd A(n_windows, nf);
    for (int s0 = 0; s0 < n_row_pos; ++s0) {
        for (int col = 0; col < acs.nx; ++col) {
            const long row = static_cast<long>(s0) * acs.nx + col;
            int f = 0;
            for (int c = 0; c < nc; ++c)
                for (int j = 0; j < n_src_lines; ++j)
                    for (int dx = 0; dx < kx; ++dx) {
                        const int yy = s0 + j * R;
                        const int xx = ((col + dx - kx / 2) % acs.nx + acs.nx) % acs.nx;
                        A(row, f++) = acs.at(c, yy, xx);
                    }
        }
    }

    double lam = lambda;
    if (lam < 0) lam = 1e-4 * (A.adjoint() * A).diagonal().real().mean();

    GrappaKernel kern;
    kern.R = R;
    kern.nc = nc;
    kern.n_src_lines = n_src_lines;
    kern.kx = kx;
    kern.lambda = lam;
    kern.weights.resize(R - 1);
    for (int r = 1; r < R; ++r) {
        Eigen::MatrixXcd B(n_windows, nc);
        for (int s0 = 0; s0 < n_row_pos; ++s0) {
            const int ty = s0 + base_off + r;
            for (int col = 0; col < acs.nx; ++col) {
                const long row = static_cast<long>(s0) * acs.nx + col;
                for (int c = 0; c < nc; ++c) B(row, c) = acs.at(c, ty, col);
            }
        }
        kern.weights[r - 1] = detail::ridge_solve(A, B, lam);
    }
    return kern;
}

// Fill the missing rows of undersampled k-space with the calibrated kernel.
// Acquired rows are passed through untouched; columns wrap circularly.
inline CoilKSpace grappa_fill(const CoilKSpace& ksp, const SamplingMask& mask,
                              const GrappaKernel& kern) {
    if (mask.n_pe() != ksp.ny) throw Error("ShapeMismatch");
    if (kern.R != mask.accel || kern.nc != ksp.nc) throw Error("KernelMismatch");

    CoilKSpace out = ksp;
    const int ny = ksp.ny, nx = ksp.nx, nc = ksp.nc;
    const int R = kern.R, kx = kern.kx;
    const auto line_off = detail::grappa_line_offsets(kern.n_src_lines, R);
    Eigen::VectorXcd src(kern.n_features());

    for (int t = 0; t < ny; ++t) {
        if (mask.keep[t]) continue;
        const int r = t % R;
        if (r == 0) continue; // pattern line; never missing for valid masks
        const int base = t - r;
        for (int col = 0; col < nx; ++col) {
            int f = 0;
            for (int c = 0; c < nc; ++c)
                for (int off : line_off)
                    for (int dx = 0; dx < kx; ++dx) {
                        const int yy = ((base + off) % ny + ny) % ny;
                        const int xx = ((col + dx - kx / 2) % nx + nx) % nx;
                        src[f++] = ksp.at(c, yy, xx);
                    }
            const Eigen::VectorXcd fill = kern.weights[r - 1].transpose() * src;
            for (int c = 0; c < nc; ++c) out.at(c, t, col) = fill[c];
        }
    }
    return out;
}

inline RealImage grappa_reconstruct(const CoilKSpace& ksp_under, const SamplingMask& mask,
                                    const GrappaKernel& kern) {
    return zero_filled_recon(grappa_fill(ksp_under, mask, kern));
}

} // namespace ksr
