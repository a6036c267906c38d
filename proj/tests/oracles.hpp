#pragma once

// Reference computations used by the tests. None of them call into the
// library, so they can catch errors the library would repeat.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace oracle {

// Plain loop over v ln(v/u) - v + u with the 0 ln 0 = 0 convention.
inline double kl(std::span<const double> v, std::span<const double> u, double w = 1.0) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] > 0.0 && u[i] == 0.0)
            return INFINITY;
        long double term = static_cast<long double>(u[i]) - v[i];
        if (v[i] > 0.0)
            term += static_cast<long double>(v[i]) * std::log(static_cast<long double>(v[i]) / u[i]);
        s += term;
    }
    return static_cast<double>(s * w);
}

inline double l1(std::span<const double> a, std::span<const double> b, double w = 1.0) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::fabs(static_cast<long double>(a[i]) - b[i]);
    return static_cast<double>(s * w);
}

// Random point of {x >= 0, w sum x = 1}, strictly positive.
inline std::vector<double> simplex_point(std::mt19937_64& rng, std::size_t n, double w = 1.0) {
    std::gamma_distribution<double> g(0.7, 1.0);
    std::vector<double> x(n);
    double s = 0.0;
    for (auto& v : x) {
        v = g(rng) + 1e-12;
        s += v;
    }
    for (auto& v : x)
        v /= s * w;
    return x;
}

// Circular mean (r N / 2 pi) int_{|omega|=1} x(sigma + r omega) of the
// normalized indicator of the disc of radius R at the origin, |sigma| = 1.
// The circle meets the disc on an arc of half-angle theta, seen from sigma's
// antipode direction, with cos theta = (1 + r^2 - R^2) / (2 r).
inline double centered_disc_circular_mean(double r, double R, int N = 1) {
    if (r <= 0.0 || r <= 1.0 - R || r >= 1.0 + R)
        return 0.0;
    const double c = (1.0 + r * r - R * R) / (2.0 * r);
    const double theta = std::acos(std::clamp(c, -1.0, 1.0));
    return N * (r * theta / std::numbers::pi) / (std::numbers::pi * R * R);
}

} // namespace oracle
