#include "loposem/error.hpp"
#include "loposem/operators.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace loposem;

namespace {

std::shared_ptr<const PixelGrid> grid(int n, double eps = 0.02) {
    return std::make_shared<const PixelGrid>(n, eps);
}

std::shared_ptr<const SinogramGrid> sino(int N, int n_phi, int n_r) {
    return std::make_shared<const SinogramGrid>(N, n_phi, n_r);
}

// Normalized Gaussian bump centred at (cx, cy), cut to Omega.
std::vector<double> bump(const PixelGrid& g, double cx, double cy, double s = 0.15) {
    std::vector<double> x(g.size(), 0.0);
    for (int ix = 0; ix <= g.n_t(); ++ix)
        for (int iy = 0; iy <= g.n_t(); ++iy) {
            const auto i = g.index(ix, iy);
            if (!g.inside(i))
                continue;
            const double dx = g.coord(ix) - cx, dy = g.coord(iy) - cy;
            x[i] = std::exp(-(dx * dx + dy * dy) / (2 * s * s));
        }
    return normalize_to_simplex(x, g.weights());
}

std::vector<double> disc(const PixelGrid& g, double R) {
    std::vector<double> x(g.size(), 0.0);
    for (int ix = 0; ix <= g.n_t(); ++ix)
        for (int iy = 0; iy <= g.n_t(); ++iy)
            if (std::hypot(g.coord(ix), g.coord(iy)) < R)
                x[g.index(ix, iy)] = 1.0;
    return normalize_to_simplex(x, g.weights());
}

std::vector<double> random_density(const PixelGrid& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<double> x(g.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i)
        if (g.inside(i))
            x[i] = u(rng);
    return normalize_to_simplex(x, g.weights());
}

double dot(std::span<const double> a, std::span<const double> b, std::span<const double> w) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += w[i] * a[i] * b[i];
    return s;
}

} // namespace

TEST_CASE("SmoothingKernel") {
    CHECK_THROWS_AS(SmoothingKernel(0, 100), ConfigError);
    CHECK_THROWS_AS(SmoothingKernel(51, 100), ConfigError);

    const SmoothingKernel k1(1, 100);
    CHECK(k1.epsilon() == doctest::Approx(0.02));
    REQUIRE(k1.weights().size() == 3u);
    CHECK(k1.weights()[0] == 0.0);
    CHECK(k1.weights()[1] == 1.0);
    CHECK(k1.weights()[2] == 0.0);

    for (int K : {1, 2, 5, 10}) {
        const SmoothingKernel k(K, 100);
        double sum = 0.0;
        for (double w : k.weights()) {
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-14);
        CHECK(std::abs(k.raw_weight_sum() - 1.0) <= 1e-2);
        CHECK(k.profile(k.epsilon() * 1.01) == 0.0);
        CHECK(k.profile(-k.epsilon() * 1.01) == 0.0);
        // Midpoint rule for the integral of the hat.
        const int n = 20000;
        const double h = 2 * k.epsilon() / n;
        double integral = 0.0;
        for (int i = 0; i < n; ++i)
            integral += h * k.profile(-k.epsilon() + (i + 0.5) * h);
        CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("smooth_radial") {
    const int n_r = 40, rows = 3, K = 3;
    const SmoothingKernel k(K, n_r);
    const std::size_t cols = n_r + 1;

    std::vector<double> c(rows * cols, 2.5);
    const auto sc = smooth_radial(c, k);
    for (int r = 0; r < rows; ++r)
        for (int i = K; i <= n_r - K; ++i)
            CHECK(sc[r * cols + i] == doctest::Approx(2.5).epsilon(1e-14));

    std::vector<double> impulse(rows * cols, 0.0);
    impulse[1 * cols + 20] = 1.0;
    const auto si = smooth_radial(impulse, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < si.size(); ++i) {
        const long row = static_cast<long>(i / cols), col = static_cast<long>(i % cols);
        if (row != 1 || std::abs(col - 20) > K - 1)
            CHECK(si[i] == 0.0);
        sum += si[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    for (int d = 1; d < K; ++d) {
        CHECK(si[cols + 20 - d] == doctest::Approx(si[cols + 20 + d]));
        CHECK(si[cols + 20 - d] < si[cols + 20 - d + 1]);
    }

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> a(rows * cols), b(rows * cols), ab(rows * cols);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
        ab[i] = 2 * a[i] - 3 * b[i];
    }
    const auto sa = smooth_radial(a, k), sb = smooth_radial(b, k), sab = smooth_radial(ab, k);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(sab[i] - (2 * sa[i] - 3 * sb[i])) <= 1e-12);
}

TEST_CASE("forward_project: centered disc against the analytic circular mean") {
    auto g = grid(100);
    const CircularRadon radon(g, sino(1, 8, 100));
    const auto x = disc(*g, 0.5);
    const auto y = radon.forward_project(x, 0);
    const int i_r = 50; // r = 1
    const double expect = oracle::centered_disc_circular_mean(1.0, 0.5);
    CHECK(expect == doctest::Approx(0.204807).epsilon(1e-4));
    for (int phi = 0; phi < 8; ++phi)
        CHECK(y[phi * 101 + i_r] == doctest::Approx(expect).epsilon(0.03));
}

TEST_CASE("forward_project: zero radius and linearity") {
    auto g = grid(40);
    const CircularRadon radon(g, sino(2, 5, 30));
    std::mt19937_64 rng(11);
    const auto a = random_density(*g, rng), b = random_density(*g, rng);
    std::vector<double> ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        ab[i] = 0.3 * a[i] + 1.7 * b[i];
    for (int j = 0; j < 2; ++j) {
        const auto ya = radon.forward_project(a, j), yb = radon.forward_project(b, j),
                   yab = radon.forward_project(ab, j);
        for (int phi = 0; phi < 5; ++phi)
            CHECK(ya[phi * 31] == 0.0);
        for (std::size_t s = 0; s < ya.size(); ++s)
            CHECK(std::abs(yab[s] - (0.3 * ya[s] + 1.7 * yb[s])) <= 1e-12);

        std::vector<double> y1(ya.size()), y2(ya.size()), y12(ya.size());
        std::uniform_real_distribution<double> u(0, 1);
        for (std::size_t s = 0; s < y1.size(); ++s) {
            y1[s] = u(rng);
            y2[s] = u(rng);
            y12[s] = 2 * y1[s] + 0.5 * y2[s];
        }
        const auto b1 = radon.backproject(y1, j), b2 = radon.backproject(y2, j),
                   b12 = radon.backproject(y12, j);
        for (std::size_t t = 0; t < b1.size(); ++t)
            CHECK(std::abs(b12[t] - (2 * b1[t] + 0.5 * b2[t])) <= 1e-12);
    }
}

TEST_CASE("forward_project preserves mass per block") {
    auto g = grid(100);
    const int N = 5;
    auto s = sino(N, 20, 100);
    const CircularRadon radon(g, s);
    std::mt19937_64 rng(5);
    for (const auto& x : {bump(*g, 0.2, -0.1), disc(*g, 0.5), random_density(*g, rng)}) {
        double total = 0.0;
        for (int j = 0; j < N; ++j) {
            const double m = weighted_sum(radon.forward_project(x, j), s->block_weights());
            CHECK(std::abs(m - 1.0) <= 1e-2);
            // The per-sample weight spreads |Sigma_j| over n_r + 1 radii spaced 2/n_r apart.
            CHECK(m == doctest::Approx(100.0 / 101.0).epsilon(1e-3));
            total += m;
        }
        CHECK(total / N == doctest::Approx(1.0).epsilon(1e-2));
    }
}

TEST_CASE("backproject of ones is one on Omega, zero elsewhere") {
    for (int N : {1, 5, 10, 20}) {
        auto g = grid(100);
        auto s = sino(N, 100 / N, 100);
        const CircularRadon radon(g, s);
        for (int j = 0; j < N; ++j) {
            const std::vector<double> ones(s->samples_per_block(), 1.0);
            const auto b = radon.backproject(ones, j);
            double defect = 0.0;
            for (std::size_t t = 0; t < b.size(); ++t) {
                if (g->inside(t))
                    defect = std::max(defect, std::abs(b[t] - 1.0));
                else
                    REQUIRE(b[t] == 0.0);
            }
            CHECK(defect <= 1e-14);
            const std::vector<double> zeros(s->samples_per_block(), 0.0);
            for (double v : radon.backproject(zeros, j))
                REQUIRE(v == 0.0);
        }
    }
}

TEST_CASE("backproject is close to the weighted transpose of forward_project") {
    auto g = grid(100);
    auto s = sino(10, 10, 100);
    const CircularRadon radon(g, s);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 3; ++trial) {
        const auto x = random_density(*g, rng);
        std::vector<double> y(s->samples_per_block());
        for (auto& v : y)
            v = u(rng);
        const int j = trial * 3;
        const double lhs = dot(radon.forward_project(x, j), y, s->block_weights());
        const double rhs = dot(x, radon.backproject(y, j), g->weights());
        const double nx = std::sqrt(dot(x, x, g->weights()));
        const double ny = std::sqrt(dot(y, y, s->block_weights()));
        CHECK(std::abs(lhs - rhs) / (nx * ny) <= 0.05);
    }
}

TEST_CASE("rotating the object by one angular step shifts the sinogram by one angle") {
    auto g = grid(100);
    const int n_angles = 40;
    auto s = sino(1, n_angles, 50);
    const CircularRadon radon(g, s);
    const double step = 2 * std::numbers::pi / n_angles;
    const double cx = 0.3, cy = -0.2;
    const double rx = std::cos(step) * cx - std::sin(step) * cy;
    const double ry = std::sin(step) * cx + std::cos(step) * cy;
    const auto y = radon.forward_project(bump(*g, cx, cy), 0);
    const auto yr = radon.forward_project(bump(*g, rx, ry), 0);
    const std::size_t cols = 51;
    double diff = 0.0, norm = 0.0;
    for (int phi = 0; phi < n_angles; ++phi) {
        const int next = (phi + 1) % n_angles;
        for (std::size_t i = 0; i < cols; ++i) {
            diff += std::abs(yr[next * cols + i] - y[phi * cols + i]);
            norm += std::abs(y[phi * cols + i]);
        }
    }
    CHECK(diff / norm <= 1e-2);
}

TEST_CASE("kernel_max bounds the forward values of unit-mass densities") {
    auto g = grid(32, 1.0 / 16);
    auto s = sino(4, 8, 32);
    const CircularRadon radon(g, s);
    const double M = radon.kernel_max();
    CHECK(M > 0.0);
    CHECK(radon.kernel_max() == M);
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<std::size_t> node(0, g->size() - 1);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t t = node(rng);
        while (!g->inside(t))
            t = node(rng);
        std::vector<double> x(g->size(), 0.0);
        x[t] = 1.0 / g->cell_measure();
        for (int j = 0; j < 4; ++j)
            for (double v : radon.forward_project(x, j))
                REQUIRE(v <= M * (1 + 1e-12));
    }
}

TEST_CASE("LambdaShiftedSystem") {
    auto g = grid(100);
    CHECK_THROWS_AS(LambdaShiftedSystem(std::make_shared<const RadonBlockSystem>(
                                            g, sino(10, 10, 100), SmoothingKernel(1, 100)),
                                        0.0),
                    ConfigError);

    SUBCASE("floor formula") {
        for (auto [N, floor] : {std::pair{10, 0.0098759}, std::pair{1, 0.0088839}}) {
            auto base = std::make_shared<const RadonBlockSystem>(g, sino(N, 100 / N, 100),
                                                                 SmoothingKernel(1, 100));
            const LambdaShiftedSystem sys(base, 0.01);
            const double expect = 0.01 / (1 + 0.01 * 4 * std::numbers::pi / N);
            CHECK(expect == doctest::Approx(floor).epsilon(1e-5));
            CHECK(sys.kernel_lower_bound() == doctest::Approx(expect).epsilon(1e-14));
            CHECK(sys.kernel_upper_bound() ==
                  doctest::Approx((base->kernel_upper_bound() + 0.01) /
                                  (1 + 0.01 * 4 * std::numbers::pi / N)));
        }
    }

    SUBCASE("adjoint of ones is exactly one for every block") {
        for (int N : {1, 5, 10, 20}) {
            auto base = std::make_shared<const RadonBlockSystem>(g, sino(N, 100 / N, 100),
                                                                 SmoothingKernel(1, 100));
            const LambdaShiftedSystem sys(base, 0.01);
            for (int j = 0; j < N; ++j) {
                const std::vector<double> ones(sys.range_size(j), 1.0);
                const auto a = sys.adjoint(j, ones);
                for (std::size_t t = 0; t < a.size(); ++t)
                    if (g->inside(t))
                        REQUIRE(std::abs(a[t] - 1.0) <= 1e-14);
            }
        }
    }

    SUBCASE("forward values lie between the kernel bounds") {
        auto base = std::make_shared<const RadonBlockSystem>(g, sino(10, 10, 100),
                                                             SmoothingKernel(1, 100));
        const LambdaShiftedSystem sys(base, 0.01);
        std::mt19937_64 rng(29);
        for (const auto& x : {random_density(*g, rng), bump(*g, 0.0, 0.5, 0.05), disc(*g, 0.3)})
            for (int j = 0; j < 10; ++j)
                for (double v : sys.forward(j, x)) {
                    REQUIRE(v >= sys.kernel_lower_bound() * (1 - 1e-12));
                    REQUIRE(v <= sys.kernel_upper_bound() * (1 + 1e-12));
                }
    }

    SUBCASE("shifted data keeps unit mass") {
        auto s = sino(10, 10, 100);
        auto base = std::make_shared<const RadonBlockSystem>(g, s, SmoothingKernel(1, 100));
        const LambdaShiftedSystem sys(base, 0.01);
        std::vector<double> y(s->samples_per_block(), 1.0 / s->block_measure());
        const auto ys = sys.shift_data(3, y);
        CHECK(weighted_sum(ys, s->block_weights()) == doctest::Approx(1.0).epsilon(1e-12));
        for (double v : ys)
            CHECK(v >= sys.kernel_lower_bound() * (1 - 1e-12));
    }
}

TEST_CASE("RadonBlockSystem with K = 1 equals the raw circular means") {
    auto g = grid(48, 1.0 / 24);
    auto s = sino(3, 4, 48);
    const RadonBlockSystem sys(g, s, SmoothingKernel(1, 48));
    const auto x = bump(*g, 0.1, 0.1);
    for (int j = 0; j < 3; ++j)
        CHECK(sys.forward(j, x) == sys.radon().forward_project(x, j));
}

TEST_CASE("DenseBlockSystem") {
    const auto id = DenseBlockSystem::identity(2);
    const std::vector<double> x{0.3, 0.7};
    CHECK(id.forward(0, x) == x);
    CHECK(id.adjoint(0, x) == x);

    // Weighted transpose is exact for explicit kernels.
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    DenseBlockSystem::Block b;
    b.weights = {0.5, 0.25, 0.25};
    for (int i = 0; i < 6; ++i)
        b.kernel.push_back(u(rng));
    const DenseBlockSystem sys({0.4, 0.6}, {b});
    const std::vector<double> y{1.0, 2.0, 3.0};
    const double lhs = dot(sys.forward(0, x), y, b.weights);
    const double rhs = dot(x, sys.adjoint(0, y), std::vector<double>{0.4, 0.6});
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
}

TEST_CASE("gamma and effective bounds") {
    CHECK(gamma_from_bounds(0.5, 2.0, 0.1, 1.5) == doctest::Approx(2.99573).epsilon(1e-5));
    CHECK(gamma_from_bounds(0.5, 2.0, 0.1, 1.5) == doctest::Approx(std::log(20.0)));
    CHECK_THROWS_AS(gamma_from_bounds(0.0, 2.0, 0.1, 1.5), DomainError);
    CHECK_THROWS_AS(gamma_from_bounds(0.5, 2.0, 0.0, 1.5), DomainError);

    const auto id = DenseBlockSystem::identity(2);
    const std::vector<std::vector<double>> data{{0.2, 0.8}};
    const auto eb = effective_bounds(id, data);
    CHECK(eb.m1 == 0.2);
    CHECK(eb.M1 == 0.8);
    const std::vector<std::vector<double>> zero{{0.0, 1.0}};
    CHECK_THROWS_AS(effective_bounds(id, zero), DomainError);

    auto g = grid(40, 0.05);
    auto base = std::make_shared<const RadonBlockSystem>(g, sino(2, 10, 40), SmoothingKernel(1, 40));
    const LambdaShiftedSystem sys(base, 0.01);
    std::vector<std::vector<double>> shifted;
    for (int j = 0; j < 2; ++j)
        shifted.push_back(sys.shift_data(
            j, std::vector<double>(sys.range_size(j), 1.0 / sys.range_measure(j))));
    const auto e2 = effective_bounds(sys, shifted);
    CHECK(e2.m1 >= sys.kernel_lower_bound() * (1 - 1e-12));
    CHECK(e2.m == sys.kernel_lower_bound());
}
