#include "loposem/error.hpp"
#include "loposem/kl_core.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace loposem;

TEST_CASE("kl_distance scalar cases") {
    const std::vector<double> half{0.5, 0.5};
    CHECK(kl_distance(half, half, 1.0) == 0.0);

    const std::vector<double> point{1.0, 0.0};
    CHECK(kl_distance(point, half, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

    const std::vector<double> v{0.2, 0.8};
    const double expect = 0.2 * std::log(0.4) + 0.8 * std::log(1.6);
    CHECK(kl_distance(v, half, 1.0) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(kl_distance(v, half, 1.0) == doctest::Approx(0.192745).epsilon(1e-6));
}

TEST_CASE("kl_distance conventions and errors") {
    const std::vector<double> v{0.5, 0.5};
    const std::vector<double> u{1.0, 0.0};
    CHECK(std::isinf(kl_distance(v, u, 1.0)));
    // v = 0 where u > 0 only contributes u.
    CHECK(kl_distance(u, v, 1.0) == doctest::Approx(std::log(2.0)));

    const std::vector<double> short_u{1.0};
    CHECK_THROWS_AS(kl_distance(v, short_u, 1.0), ShapeError);
    const std::vector<double> neg{-0.1, 1.1};
    CHECK_THROWS_AS(kl_distance(neg, v, 1.0), DomainError);
    CHECK_THROWS_AS(kl_distance(v, neg, 1.0), DomainError);
}

TEST_CASE("kl_distance honours per-node weights and skips zero weights") {
    const std::vector<double> v{0.2, 0.8, 5.0};
    const std::vector<double> u{0.5, 0.5, 0.0};
    const std::vector<double> w{2.0, 2.0, 0.0};
    const std::vector<double> v2{0.2, 0.8};
    const std::vector<double> u2{0.5, 0.5};
    CHECK(kl_distance(v, u, w) == doctest::Approx(oracle::kl(v2, u2, 2.0)).epsilon(1e-14));
}

TEST_CASE("kl_l1_bound_check examples") {
    const std::vector<double> v{0.2, 0.8};
    const std::vector<double> u{0.5, 0.5};
    CHECK(kl_l1_bound_check(v, v, std::vector<double>{1.0, 1.0}));
    CHECK(kl_l1_bound_check(v, u, std::vector<double>{1.0, 1.0}));
    // 0.36 <= 2 * 0.192745
    CHECK(oracle::l1(v, u) * oracle::l1(v, u) == doctest::Approx(0.36));
    CHECK(2.0 * oracle::kl(v, u) == doctest::Approx(0.385490).epsilon(1e-6));
}

TEST_CASE("KL properties on random simplex pairs") {
    std::mt19937_64 rng(20240611);
    std::uniform_int_distribution<std::size_t> size(2, 64);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = size(rng);
        const double w = 1.0 / static_cast<double>(n);
        const auto v = oracle::simplex_point(rng, n, w);
        const auto u = oracle::simplex_point(rng, n, w);
        const double d = kl_distance(v, u, w);
        REQUIRE(d >= 0.0);
        CHECK(d == doctest::Approx(oracle::kl(v, u, w)).epsilon(1e-10));
        CHECK(kl_distance(v, v, w) == doctest::Approx(0.0).epsilon(1e-12));
        const double l1 = l1_distance(v, u, std::vector<double>(n, w));
        CHECK(l1 * l1 <= 2.0 * d + 1e-12);

        const auto v2 = oracle::simplex_point(rng, n, w);
        const auto u2 = oracle::simplex_point(rng, n, w);
        const double s = unit(rng);
        std::vector<double> vm(n), um(n);
        for (std::size_t i = 0; i < n; ++i) {
            vm[i] = s * v[i] + (1 - s) * v2[i];
            um[i] = s * u[i] + (1 - s) * u2[i];
        }
        CHECK(kl_distance(vm, um, w) <= s * d + (1 - s) * kl_distance(v2, u2, w) + 1e-10);
    }
}

TEST_CASE("normalize_to_simplex") {
    auto a = normalize_to_simplex(std::vector<double>{2.0, 2.0}, 1.0);
    CHECK(a[0] == doctest::Approx(0.5));
    CHECK(a[1] == doctest::Approx(0.5));

    auto b = normalize_to_simplex(std::vector<double>{1.0, 3.0}, std::vector<double>{0.5, 0.5});
    CHECK(b[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(b[1] == doctest::Approx(1.5).epsilon(1e-15));

    CHECK_THROWS_AS(normalize_to_simplex(std::vector<double>{0.0, 0.0}, 1.0), DomainError);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto x = oracle::simplex_point(rng, 16, 0.25);
        const auto once = normalize_to_simplex(x, 0.25);
        const auto twice = normalize_to_simplex(once, 0.25);
        std::vector<double> scaled(x);
        const double c = scale(rng);
        for (auto& v : scaled)
            v *= c;
        const auto from_scaled = normalize_to_simplex(scaled, 0.25);
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(std::abs(twice[i] - once[i]) <= 1e-15 * std::max(1.0, once[i]));
            CHECK(from_scaled[i] == doctest::Approx(once[i]).epsilon(1e-13));
            CHECK(once[i] == doctest::Approx(x[i]).epsilon(1e-13));
        }
    }
}

TEST_CASE("PixelGrid geometry") {
    CHECK_THROWS_AS(PixelGrid(1, 0.02), ConfigError);
    CHECK_THROWS_AS(PixelGrid(10, 0.0), ConfigError);
    CHECK_THROWS_AS(PixelGrid(10, 1.0), ConfigError);

    const PixelGrid g(100, 0.02);
    CHECK(g.size() == 101u * 101u);
    CHECK(g.coord(0) == -1.0);
    CHECK(g.coord(100) == 1.0);
    CHECK(g.coord(50) == 0.0);
    CHECK(g.cell_measure() == doctest::Approx(4e-4));
    for (int ix = 0; ix <= 100; ++ix)
        for (int iy = 0; iy <= 100; ++iy) {
            const auto idx = g.index(ix, iy);
            const bool in = std::hypot(g.coord(ix), g.coord(iy)) < 0.98;
            REQUIRE(g.inside(idx) == in);
            // Symmetric under reflection and transposition.
            REQUIRE(g.inside(g.index(100 - ix, iy)) == in);
            REQUIRE(g.inside(g.index(ix, 100 - iy)) == in);
            REQUIRE(g.inside(g.index(iy, ix)) == in);
            REQUIRE(g.weights()[idx] == (in ? g.cell_measure() : 0.0));
        }
    // Omega area pi (1 - eps)^2 up to pixelization.
    CHECK(g.inside_count() * g.cell_measure() ==
          doctest::Approx(std::numbers::pi * 0.98 * 0.98).epsilon(1e-2));
}

TEST_CASE("DensityGrid validation") {
    auto g = std::make_shared<const PixelGrid>(16, 0.1);
    const auto u = DensityGrid::uniform(g);
    CHECK(u.mass() == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < g->size(); ++i)
        CHECK((u.values()[i] > 0.0) == g->inside(i));

    std::vector<double> bad(u.values().begin(), u.values().end());
    bad[0] = 1.0; // corner node, outside Omega
    CHECK_THROWS_AS(DensityGrid(g, bad), DomainError);

    std::vector<double> scaled(u.values().begin(), u.values().end());
    for (auto& v : scaled)
        v *= 2.0;
    CHECK_THROWS(DensityGrid(g, scaled));
    CHECK(DensityGrid::normalized(g, scaled).mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(kl_distance(u, u) == 0.0);
}

TEST_CASE("SinogramGrid tiling and weights") {
    for (int N : {1, 5, 10, 20}) {
        const SinogramGrid s(N, 100 / N, 100);
        CHECK(s.n_angles() == 100);
        std::vector<double> angles;
        for (int g = 0; g < s.n_angles(); ++g)
            angles.push_back(s.angle(g));
        CHECK(angles.front() == 0.0);
        for (std::size_t i = 1; i < angles.size(); ++i)
            CHECK(angles[i] - angles[i - 1] == doctest::Approx(2 * std::numbers::pi / 100));
        CHECK(angles.back() < 2 * std::numbers::pi);
        CHECK(s.radius(0) == 0.0);
        CHECK(s.radius(100) == 2.0);
        long double total = 0.0L;
        for (double w : s.block_weights())
            total += w;
        CHECK(std::abs(static_cast<double>(total) - 4 * std::numbers::pi / N) <= 1e-12);
        CHECK(s.block_measure() == doctest::Approx(4 * std::numbers::pi / N));
    }
}

TEST_CASE("SinogramBlock mass and normalization") {
    auto s = std::make_shared<const SinogramGrid>(2, 3, 4);
    std::vector<double> ones(s->samples_per_block(), 1.0);
    SinogramBlock b(s, 1, ones);
    CHECK(b.mass() == doctest::Approx(s->block_measure()));
    CHECK_FALSE(b.normalized());
    const auto n = b.normalized_copy();
    CHECK(n.normalized(1e-12));
    CHECK(n.block() == 1);
    CHECK_THROWS(SinogramBlock(s, 0, std::vector<double>(3, 1.0)));
    std::vector<double> neg(ones);
    neg[2] = -1.0;
    CHECK_THROWS_AS(SinogramBlock(s, 0, neg), DomainError);
}
