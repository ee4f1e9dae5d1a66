#pragma once

// Test-only oracles, kept independent of the implementation paths they check:
// refined Simpson quadrature, central finite differences, and a Taylor
// scaling-squaring matrix exponential for the linear-model cross-check.

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "gle/linalg.hpp"

namespace oracle {

// Composite Simpson with doubling until two refinements agree to rel_tol.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double rel_tol = 1e-13) {
    auto pass = [&](int n) {
        const double h = (b - a) / n;
        double s = f(a) + f(b);
        for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
        return s * h / 3.0;
    };
    double prev = pass(64);
    for (int n = 128; n <= (1 << 22); n *= 2) {
        const double cur = pass(n);
        if (std::abs(cur - prev) <= rel_tol * (std::abs(cur) + 1e-300)) return cur;
        prev = cur;
    }
    return prev;
}

inline std::complex<double> simpson_complex(const std::function<std::complex<double>(double)>& f,
                                            double a, double b, int n = 1 << 16) {
    const double h = (b - a) / n;
    std::complex<double> s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * (h / 3.0);
}

inline double central_diff(const std::function<double(double)>& f, double x,
                           double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// exp(A) by scaling-squaring on a 20-term Taylor series; fine at these scales.
inline gle::Mat expm(gle::Mat a) {
    const int n = a.rows();
    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) row += std::abs(a(i, j));
        norm = std::max(norm, row);
    }
    int squarings = 0;
    while (norm > 0.5) {
        norm /= 2.0;
        ++squarings;
    }
    const double scale = std::ldexp(1.0, -squarings);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) *= scale;
    gle::Mat result = gle::Mat::identity(n);
    gle::Mat term = gle::Mat::identity(n);
    for (int k = 1; k <= 20; ++k) {
        term = term * a;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) term(i, j) /= k;
        result = result + term;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

// Two-sided Kolmogorov-Smirnov statistic against the standard normal CDF.
inline double ks_statistic_normal(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    double d = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const double cdf = 0.5 * std::erfc(-samples[i] / std::sqrt(2.0));
        d = std::max(d, std::abs(cdf - (i + 1) / n));
        d = std::max(d, std::abs(cdf - i / n));
    }
    return d;
}

}  // namespace oracle
