#pragma once

// Parameter identification: the exponential tensile law from stress-stretch
// samples, and non-negative Prony spectra from normalized relaxation data.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlv/constitutive.hpp"
#include "qlv/error.hpp"
#include "qlv/kernels.hpp"

namespace qlv {

struct ExponentialFit {
    ExponentialTensileLaw law{1.0, 1.0};
    double regression_B = 0.0;  // initial estimate from the slope regression
    double regression_C = 0.0;
    double residual_norm = 0.0;  // ‖T_fit − T_data‖₂
    int iterations = 0;
    bool converged = false;
    bool B_clamped = false;  // fitted B was <= 0 and was replaced by a tiny positive value
};

namespace detail {

// T = C·x·φ(Bx), φ(z) = expm1(z)/z; also returns ∂T/∂B and ∂T/∂C.
struct ExpLawEval {
    double value, dB, dC;
};

inline ExpLawEval exp_law_eval(double B, double C, double x) {
    const double z = B * x;
    if (z > kMaxExponent) throw FitError("exponential law overflow during fitting");
    const double phi = expm1_over(z);
    // φ'(z) = (e^z(z − 1) + 1)/z²
    double dphi;
    if (std::abs(z) < 1e-3) dphi = 0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0;
    else dphi = (std::exp(z) * (z - 1.0) + 1.0) / (z * z);
    return {C * x * phi, C * x * x * dphi, x * phi};
}

}  // namespace detail

/// Fits dT/dλ = B·T + C: secant slopes regressed on mid-interval stress give
/// a starting (B, C), refined by damped Gauss-Newton on
/// T(λ) = (C/B)(exp(B(λ−1)) − 1).
inline ExponentialFit fit_exponential_law(std::span<const double> stretch, std::span<const double> stress) {
    if (stretch.size() != stress.size()) throw DomainError("fit: stretch and stress differ in length");
    if (stretch.size() < 3) {
        throw DomainError("fit needs at least 3 samples, got " + std::to_string(stretch.size()));
    }
    const std::size_t n = stretch.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(stretch[i]) || !std::isfinite(stress[i])) throw DomainError("fit: non-finite sample");
        if (i > 0 && !(stretch[i] > stretch[i - 1])) throw DomainError("fit: stretch must be strictly increasing");
    }

    // Regression of dT/dλ on T.
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        xs.push_back(0.5 * (stress[i] + stress[i + 1]));
        ys.push_back((stress[i + 1] - stress[i]) / (stretch[i + 1] - stretch[i]));
    }
    const double m = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / m;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / m;
    double sxx = 0.0, sxy = 0.0, range = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        range = std::max(range, std::abs(xs[i]));
    }
    if (!(sxx > 1e-24 * std::max(1.0, range * range) * m)) {
        throw FitError("fit: slope regression is singular (stress does not vary)");
    }
    ExponentialFit fit;
    fit.regression_B = sxy / sxx;
    fit.regression_C = my - fit.regression_B * mx;

    double xmax = 0.0;
    for (double l : stretch) xmax = std::max(xmax, std::abs(l - 1.0));
    if (!(xmax > 0.0)) throw FitError("fit: all samples at the reference stretch");

    auto residual = [&](double B, double C) {
        double r = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = detail::exp_law_eval(B, C, stretch[i] - 1.0).value - stress[i];
            r += d * d;
        }
        return r;
    };

    double B = fit.regression_B, C = fit.regression_C;
    if (!(C > 0.0)) C = std::max(std::abs(my), 1e-12);
    double r = residual(B, C);
    for (int it = 1; it <= 100; ++it) {
        fit.iterations = it;
        Eigen::Matrix2d JtJ = Eigen::Matrix2d::Zero();
        Eigen::Vector2d Jtr = Eigen::Vector2d::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            const auto e = detail::exp_law_eval(B, C, stretch[i] - 1.0);
            const Eigen::Vector2d g(e.dB, e.dC);
            JtJ += g * g.transpose();
            Jtr += g * (e.value - stress[i]);
        }
        const Eigen::Vector2d delta = -JtJ.ldlt().solve(Jtr);
        if (!delta.allFinite()) throw FitError("fit: Gauss-Newton normal equations are singular");
        double step = 1.0;
        double Bn = B + delta[0], Cn = C + delta[1];
        double rn;
        for (;;) {
            try {
                rn = residual(Bn, Cn);
            } catch (const FitError&) {
                rn = std::numeric_limits<double>::infinity();
            }
            if (rn <= r || step < 1e-10) break;
            step *= 0.5;
            Bn = B + step * delta[0];
            Cn = C + step * delta[1];
        }
        const double change = std::max(std::abs(Bn - B) / (std::abs(B) + 1.0 / xmax), std::abs(Cn - C) / std::abs(C));
        if (rn <= r) {
            B = Bn;
            C = Cn;
            r = rn;
        }
        if (change < 1e-10) {
            fit.converged = true;
            break;
        }
    }
    if (!(C > 0.0)) throw FitError("fit: intercept coefficient C is not positive");
    if (!(B > 0.0)) {
        B = 1e-12;
        fit.B_clamped = true;
        r = residual(B, C);
    }
    fit.law = ExponentialTensileLaw(B, C);
    fit.residual_norm = std::sqrt(r);
    return fit;
}

/// Lawson-Hanson non-negative least squares: min ‖Ax − b‖ subject to x >= 0.
inline Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iter = 0) {
    const auto n = A.cols();
    if (max_iter <= 0) max_iter = static_cast<int>(3 * n + 30);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double tol = 1e-12 * A.cwiseAbs().maxCoeff() * std::max(1.0, b.cwiseAbs().maxCoeff()) * static_cast<double>(A.rows());

    auto solve_passive = [&]() {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        }
        Eigen::MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
        const Eigen::VectorXd zp = Ap.colPivHouseholderQr().solve(b);
        Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[static_cast<Eigen::Index>(k)];
        return z;
    };

    for (int outer = 0; outer < max_iter; ++outer) {
        const Eigen::VectorXd w = A.transpose() * (b - A * x);
        Eigen::Index best = -1;
        double wmax = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w[j] > wmax) {
                wmax = w[j];
                best = j;
            }
        }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;
        for (int inner = 0; inner < max_iter; ++inner) {
            Eigen::VectorXd z = solve_passive();
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) feasible = false;
            }
            if (feasible) {
                x = z;
                break;
            }
            double alpha = 1.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - z[j]));
            }
            x += alpha * (z - x);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && x[j] <= 1e-15 * std::max(1.0, x.cwiseAbs().maxCoeff())) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    return x;
}

struct SpectrumFit {
    PronySpectrum spectrum;
    double max_error = 0.0;
};

/// NNLS fit of K + Σ αn·exp(−νn t) at the given frequencies.
inline SpectrumFit fit_relaxation_spectrum(std::span<const double> times, std::span<const double> values,
                                           std::vector<double> frequencies) {
    if (times.size() != values.size() || times.size() < 2) {
        throw DomainError("spectrum fit needs >= 2 matching samples");
    }
    if (times[0] != 0.0 || std::abs(values[0] - 1.0) > 1e-12) {
        throw DomainError("relaxation series must be normalized: first sample must be (0, 1)");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) throw DomainError("relaxation series times must increase");
        if (values[i] > values[i - 1] + 1e-12) {
            throw DomainError("relaxation series must be non-increasing (sample " + std::to_string(i) + ")");
        }
    }
    std::sort(frequencies.begin(), frequencies.end());
    const auto rows = static_cast<Eigen::Index>(times.size());
    const auto cols = static_cast<Eigen::Index>(frequencies.size()) + 1;
    Eigen::MatrixXd A(rows, cols);
    Eigen::VectorXd b(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double t = times[static_cast<std::size_t>(i)];
        A(i, 0) = 1.0;
        for (std::size_t k = 0; k < frequencies.size(); ++k) {
            A(i, static_cast<Eigen::Index>(k) + 1) = std::exp(-frequencies[k] * t);
        }
        b[i] = values[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd x = nnls(A, b);
    std::vector<PronyTerm> terms;
    for (std::size_t k = 0; k < frequencies.size(); ++k) {
        terms.push_back({x[static_cast<Eigen::Index>(k) + 1], frequencies[k]});
    }
    SpectrumFit fit{PronySpectrum(x[0], std::move(terms)), 0.0};
    fit.max_error = (A * x - b).cwiseAbs().maxCoeff();
    return fit;
}

/// As above with n_terms frequencies log-spaced over the inverse of the
/// observed time span [first positive time, last time].
inline SpectrumFit fit_relaxation_spectrum(std::span<const double> times, std::span<const double> values,
                                           std::size_t n_terms) {
    if (n_terms == 0) throw DomainError("spectrum fit needs at least one term");
    if (times.size() < 2) throw DomainError("spectrum fit needs >= 2 samples");
    const double tmin = times[1], tmax = times.back();
    std::vector<double> freqs(n_terms);
    if (n_terms == 1) {
        freqs[0] = 1.0 / std::sqrt(tmin * tmax);
    } else {
        const double lo = std::log(1.0 / tmax), hi = std::log(1.0 / tmin);
        for (std::size_t k = 0; k < n_terms; ++k) {
            freqs[k] = std::exp(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_terms - 1));
        }
    }
    return fit_relaxation_spectrum(times, values, std::move(freqs));
}

}  // namespace qlv
