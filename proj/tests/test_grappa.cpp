#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ksr/grappa.hpp"
#include "ksr/metrics.hpp"

using namespace ksr;

namespace {

CoilKSpace random_kspace(std::mt19937_64& rng, int nc, int ny, int nx) {
    std::normal_distribution<double> dist;
    CoilKSpace k(nc, ny, nx);
    for (auto& z : k.v) z = {dist(rng), dist(rng)};
    return k;
}

} // namespace

TEST_CASE("ridge solve recovers the generating weights of a consistent system") {
    // b = A * w_true with full-column-rank A and lambda = 0
    std::mt19937_64 rng(42);
    std::normal_distribution<double> dist;
    const int rows = 600, nf = 48, nc = 4;
    Eigen::MatrixXcd A(rows, nf), w_true(nf, nc);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < nf; ++j) A(i, j) = {dist(rng), dist(rng)};
    for (int i = 0; i < nf; ++i)
        for (int j = 0; j < nc; ++j) w_true(i, j) = {dist(rng), dist(rng)};
    const Eigen::MatrixXcd B = A * w_true;
    const Eigen::MatrixXcd w = ksr::detail::ridge_solve(A, B, 0.0);
    CHECK((w - w_true).norm() < 1e-6 * w_true.norm());
}

TEST_CASE("ridge limit: huge lambda shrinks weights toward zero") {
    std::mt19937_64 rng(5);
    const CoilKSpace acs = random_kspace(rng, 4, 24, 16);
    const GrappaKernel k_small = calibrate(acs, 2, 4, 3, 1e-8);
    const GrappaKernel k_huge = calibrate(acs, 2, 4, 3, 1e12);
    double n_small = 0, n_huge = 0;
    for (const auto& w : k_small.weights) n_small += w.norm();
    for (const auto& w : k_huge.weights) n_huge += w.norm();
    CHECK(n_huge < 1e-6 * n_small);
}

TEST_CASE("ridge shrinkage is monotone in lambda") {
    std::mt19937_64 rng(6);
    const CoilKSpace acs = random_kspace(rng, 4, 24, 16);
    double prev = -1;
    for (double lam : {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
        const GrappaKernel k = calibrate(acs, 2, 4, 3, lam);
        double n = 0;
        for (const auto& w : k.weights) n += w.norm() * w.norm();
        if (prev >= 0) CHECK(n <= prev * (1 + 1e-12));
        prev = n;
    }
}

TEST_CASE("duplicate coils: ridge keeps the solve finite") {
    std::mt19937_64 rng(8);
    CoilKSpace acs = random_kspace(rng, 3, 24, 16);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 16; ++x) acs.at(1, y, x) = acs.at(0, y, x);
    const GrappaKernel k = calibrate(acs, 2, 4, 3, 1e-4);
    for (const auto& w : k.weights) CHECK(w.allFinite());
    // and lambda = 0 on the same rank-deficient system is rejected
    CHECK_THROWS_WITH(calibrate(acs, 2, 4, 3, 0.0),
                      Catch::Matchers::ContainsSubstring("SingularCalibration"));
}

TEST_CASE("calibration preconditions") {
    std::mt19937_64 rng(9);
    CHECK_THROWS_WITH(calibrate(random_kspace(rng, 1, 24, 16), 2),
                      Catch::Matchers::ContainsSubstring("NeedMultipleCoils"));
    CHECK_THROWS_WITH(calibrate(random_kspace(rng, 4, 8, 16), 4), // span 13 > 8 rows
                      Catch::Matchers::ContainsSubstring("InsufficientCalibration"));
}

TEST_CASE("reconstruct leaves acquired rows bit-exact and fills the rest") {
    const RealImage img = shepp_logan(64, 64);
    const SensitivityMaps sens = make_sensitivities(8, 64, 64);
    const CoilKSpace full = forward_acquire(img, sens);
    const SamplingMask mask = build_mask(64, 4, 16);
    const CoilKSpace masked = apply_mask(full, mask);

    const int start = 64 / 2 - 16 / 2;
    CoilKSpace acs(8, 16, 64);
    for (int c = 0; c < 8; ++c)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 64; ++x) acs.at(c, y, x) = masked.at(c, start + y, x);
    const GrappaKernel kern = calibrate(acs, 4);

    const CoilKSpace filled = grappa_fill(masked, mask, kern);
    int n_filled = 0;
    for (int c = 0; c < 8; ++c)
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                if (mask.keep[y]) {
                    CHECK(filled.at(c, y, x) == masked.at(c, y, x)); // data consistency
                } else if (std::abs(filled.at(c, y, x)) > 0) {
                    ++n_filled;
                }
            }
    CHECK(n_filled > 0);

    SECTION("image is closer to truth than zero-fill") {
        const double mse_grappa = mse(img, grappa_reconstruct(masked, mask, kern));
        const double mse_zf = mse(img, zero_filled_recon(masked));
        CHECK(mse_grappa < mse_zf);
    }
}

TEST_CASE("fully sampled input reduces to plain zero-fill reconstruction") {
    const RealImage img = shepp_logan(32, 32);
    const CoilKSpace full = forward_acquire(img, make_sensitivities(4, 32, 32));
    const SamplingMask mask = build_mask(32, 1, 8);
    GrappaKernel kern;
    kern.R = 1;
    kern.nc = 4;
    kern.n_src_lines = 4;
    kern.kx = 5;
    const RealImage a = grappa_reconstruct(full, mask, kern);
    const RealImage b = zero_filled_recon(full);
    CHECK(a.v == b.v);
}

TEST_CASE("kernel/data mismatch is rejected") {
    std::mt19937_64 rng(10);
    const CoilKSpace acs = random_kspace(rng, 4, 32, 16);
    const GrappaKernel kern = calibrate(acs, 2);
    const CoilKSpace data = random_kspace(rng, 4, 16, 16);
    CHECK_THROWS_WITH(grappa_fill(data, build_mask(16, 4, 4), kern),
                      Catch::Matchers::ContainsSubstring("KernelMismatch"));
    const CoilKSpace data3 = random_kspace(rng, 3, 16, 16);
    CHECK_THROWS_WITH(grappa_fill(data3, build_mask(16, 2, 4), kern),
                      Catch::Matchers::ContainsSubstring("KernelMismatch"));
}

TEST_CASE("improvement property over 5 seeds: GRAPPA <= 0.7 x zero-fill MSE") {
    const SamplingMask mask = build_mask(64, 4, 16);
    const SensitivityMaps sens = make_sensitivities(8, 64, 64);
    double sum_g = 0, sum_zf = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const RealImage img = random_phantom(64, 64, seed);
        const CoilKSpace masked = apply_mask(forward_acquire(img, sens), mask);
        sum_zf += mse(img, zero_filled_recon(masked));
        sum_g += mse(img, method_grappa()(masked, mask));
    }
    CHECK(sum_g <= 0.7 * sum_zf);
}
