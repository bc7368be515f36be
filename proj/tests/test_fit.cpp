#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qlv/fit.hpp"

using namespace qlv;

namespace {

struct Samples {
    std::vector<double> stretch, stress;
};

Samples exponential_samples(double B, double C, std::size_t n, double lmax) {
    Samples s;
    const ExponentialTensileLaw law(B, C);
    for (std::size_t i = 0; i < n; ++i) {
        const double l = 1.0 + (lmax - 1.0) * static_cast<double>(i) / static_cast<double>(n - 1);
        s.stretch.push_back(l);
        s.stress.push_back(tensile_stress(law, l));
    }
    return s;
}

std::vector<double> log_times(double lo, double hi, std::size_t per_decade) {
    std::vector<double> t{0.0};
    for (double x : log_grid(lo, hi, per_decade)) t.push_back(x);
    return t;
}

}  // namespace

TEST(FitExponential, NoiselessRecovery) {
    const auto s = exponential_samples(2.0, 3.0, 50, 2.0);
    const auto f = fit_exponential_law(s.stretch, s.stress);
    EXPECT_NEAR(f.law.B(), 2.0, 2e-3);
    EXPECT_NEAR(f.law.C(), 3.0, 3e-3);
    EXPECT_TRUE(f.converged);
    EXPECT_LT(f.residual_norm, 1e-8);
}

TEST(FitExponential, NoisyRecoveryIsSeeded) {
    const auto clean = exponential_samples(2.0, 3.0, 50, 2.0);
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> noise(0.0, 0.01);
    auto s = clean;
    for (auto& v : s.stress) v *= 1.0 + noise(rng);
    const auto f = fit_exponential_law(s.stretch, s.stress);
    EXPECT_NEAR(f.law.B(), 2.0, 0.1);
    EXPECT_NEAR(f.law.C(), 3.0, 0.15);
}

TEST(FitExponential, LinearDataDrivesBToZero) {
    const double k = 4.0;
    Samples s;
    for (int i = 0; i < 30; ++i) {
        const double l = 1.0 + 0.02 * i;
        s.stretch.push_back(l);
        s.stress.push_back(k * (l - 1.0));
    }
    const auto f = fit_exponential_law(s.stretch, s.stress);
    EXPECT_LE(std::abs(f.law.B()), 1e-3 * k);
    EXPECT_NEAR(f.law.C(), k, 1e-3 * k);
}

TEST(FitExponential, Preconditions) {
    const std::vector<double> two{1.0, 1.1};
    EXPECT_THROW(fit_exponential_law(two, two), DomainError);
    const std::vector<double> l{1.0, 1.1, 1.05};
    const std::vector<double> t{0.0, 0.1, 0.2};
    EXPECT_THROW(fit_exponential_law(l, t), DomainError);
    const std::vector<double> l2{1.0, 1.1, 1.2, 1.3};
    const std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
    EXPECT_THROW(fit_exponential_law(l2, flat), FitError);
}

TEST(FitSpectrum, ThreeTermRoundTrip) {
    const PronySpectrum truth(0.1, {{0.2, 0.05}, {0.3, 1.0}, {0.4, 20.0}});
    const auto t = log_times(1e-3, 1e3, 20);
    std::vector<double> g;
    for (double x : t) g.push_back(prony_relaxation(truth, x));
    const auto f = fit_relaxation_spectrum(t, g, std::vector<double>{0.05, 1.0, 20.0});
    EXPECT_NEAR(f.spectrum.equilibrium(), 0.1, 1e-6);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(f.spectrum.terms()[k].amplitude, truth.terms()[k].amplitude, 1e-6);
    }
    EXPECT_LE(f.max_error, 1e-10);
}

TEST(FitSpectrum, ConstantSeries) {
    const auto t = log_times(0.01, 100.0, 10);
    const std::vector<double> ones(t.size(), 1.0);
    const auto f = fit_relaxation_spectrum(t, ones, 8);
    EXPECT_NEAR(f.spectrum.equilibrium(), 1.0, 1e-12);
    for (const auto& term : f.spectrum.terms()) EXPECT_NEAR(term.amplitude, 0.0, 1e-12);
}

TEST(FitSpectrum, FungClosedFormWith64Terms) {
    const FungSpectrum s(0.5, 0.01, 100.0);
    const auto t = log_times(1e-4, 1e4, 25);
    std::vector<double> g;
    for (double x : t) g.push_back(fung_reduced_relaxation(s, x));
    const auto f = fit_relaxation_spectrum(t, g, 64);
    EXPECT_LE(f.max_error, 1e-3);
    EXPECT_TRUE(f.spectrum.is_dissipative());
    for (double x : log_grid(1e-3, 1e3, 7)) {
        EXPECT_NEAR(prony_relaxation(f.spectrum, x), fung_reduced_relaxation(s, x), 1e-3);
    }
}

TEST(FitSpectrum, RejectsUnnormalizedOrIncreasingData) {
    EXPECT_THROW(fit_relaxation_spectrum(std::vector<double>{0.0, 1.0}, std::vector<double>{2.0, 1.0}, 1), DomainError);
    EXPECT_THROW(fit_relaxation_spectrum(std::vector<double>{0.0, 1.0, 2.0}, std::vector<double>{1.0, 0.5, 0.7}, 1),
                 DomainError);
}

TEST(Nnls, MatchesUnconstrainedWhenInteriorAndClampsOtherwise) {
    Eigen::MatrixXd A(4, 2);
    A << 1, 0, 0, 1, 1, 1, 2, 1;
    const Eigen::Vector2d x_true(0.7, 1.3);
    const Eigen::VectorXd x = nnls(A, A * x_true);
    EXPECT_NEAR(x[0], 0.7, 1e-12);
    EXPECT_NEAR(x[1], 1.3, 1e-12);
    const Eigen::VectorXd y = nnls(A, A * Eigen::Vector2d(-1.0, 2.0));
    EXPECT_EQ(y[0], 0.0);
    EXPECT_GE(y[1], 0.0);
    // Clamped optimum: with x0 = 0 the best x1 is the 1-D projection.
    const Eigen::VectorXd b = A * Eigen::Vector2d(-1.0, 2.0);
    EXPECT_NEAR(y[1], A.col(1).dot(b) / A.col(1).squaredNorm(), 1e-12);
}
