#pragma once

#include <cmath>
#include <limits>

#include "qlv/error.hpp"

namespace qlv {

/// Exponential integral E1(x) = ∫_x^∞ e^{-u}/u du for x > 0.
///
/// Power series for x <= 1, modified-Lentz continued fraction above. Both
/// branches converge to full double precision on their side of the switch.
inline double expint_e1(double x) {
    if (!(x > 0.0)) throw DomainError("E1 requires x > 0, got " + detail::fmt_num(x));
    if (std::isinf(x)) return 0.0;
    constexpr double euler_gamma = 0.57721566490153286061;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (x <= 1.0) {
        // E1(x) = -γ - ln x - Σ_{k>=1} (-x)^k / (k·k!)
        double sum = 0.0;
        double term = 1.0;
        for (int k = 1; k < 100; ++k) {
            term *= -x / k;
            const double add = term / k;
            sum += add;
            if (std::abs(add) < eps * std::abs(sum)) break;
        }
        return -euler_gamma - std::log(x) - sum;
    }
    if (x > 745.0) return 0.0;
    // E1(x) = e^{-x} · 1/(x+1- 1/(x+3- 4/(x+5- ...)))
    constexpr double tiny = 1e-300;
    double b = x + 1.0;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -static_cast<double>(i) * i;
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        const double del = c * d;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h * std::exp(-x);
}

/// E1(x2) − E1(x1) for 0 < x2 <= x1, avoiding the ln-cancellation for small
/// arguments.
inline double expint_e1_difference(double x2, double x1) {
    if (x1 <= 1.0) {
        constexpr double eps = std::numeric_limits<double>::epsilon();
        // The -γ terms cancel; ln(x1/x2) plus the series difference.
        double sum = 0.0;
        double t1 = 1.0, t2 = 1.0;
        for (int k = 1; k < 100; ++k) {
            t1 *= -x1 / k;
            t2 *= -x2 / k;
            const double add = (t1 - t2) / k;
            sum += add;
            if (std::abs(add) <= eps * std::abs(sum)) break;
        }
        return std::log(x1 / x2) + sum;
    }
    return expint_e1(x2) - expint_e1(x1);
}

}  // namespace qlv
