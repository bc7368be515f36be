#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "qlv/hereditary.hpp"
#include "qlv/protocols.hpp"

using namespace qlv;

namespace {

StrainHistory uniform_history(std::size_t n, double dt, const std::function<double(double)>& f,
                              HistoryMeasure m = HistoryMeasure::engineering) {
    StrainHistory h;
    h.measure = m;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        h.times.push_back(t);
        h.values.push_back(f(t));
    }
    return h;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double max_rel_dev(const StressHistory& a, const StressHistory& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.stress[i] - b.stress[i]));
    return d / max_abs(b.stress);
}

// Smooth random strain: a few sinusoids plus a ramp, starting from zero.
std::function<double(double)> random_smooth(std::mt19937_64& rng, double T) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::array<double, 3>> modes;
    for (int k = 0; k < 4; ++k) modes.push_back({0.02 * u(rng), (0.5 + 6.0 * u(rng)) / T * 2.0 * std::numbers::pi, 6.3 * u(rng)});
    const double ramp = 0.05 * u(rng) / T;
    return [modes, ramp](double t) {
        double e = ramp * t;
        for (const auto& m : modes) e += m[0] * (std::sin(m[1] * t + m[2]) - std::sin(m[2]));
        return e;
    };
}

// T(t) for strain r·t, elastic law k·ε and G = K + α·e^{−νt}.
double ramp_response(double k, double r, double K, double alpha, double nu, double t) {
    return k * r * (K * t - alpha * std::expm1(-nu * t) / nu);
}

}  // namespace

TEST(Qlv, ElasticLimitIsExact) {
    const QlvModel model(ExponentialTensileLaw(5.0, 0.2), ReducedRelaxation(ElasticKernel{}));
    std::mt19937_64 rng(1);
    const auto h = uniform_history(300, 0.01, random_smooth(rng, 3.0));
    const auto fast = qlv_stress_fast(model, h);
    const auto direct = qlv_stress_direct(model, h);
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double te = tensile_stress(ExponentialTensileLaw(5.0, 0.2), 1.0 + h.values[i]);
        EXPECT_NEAR(fast.stress[i], te, 1e-15 * std::max(1.0, std::abs(te)));
        EXPECT_NEAR(direct.stress[i], te, 1e-15 * std::max(1.0, std::abs(te)));
    }
}

TEST(Qlv, StepResponseFactorizes) {
    const std::vector<ViscoKernel> kernels{MaxwellParams(2.0, 1.0), VoigtParams(1.0, 0.5), KelvinParams(1.0, 0.3, 1.2),
                                           PronySpectrum(0.2, {{0.5, 0.7}, {0.3, 9.0}}), FungSpectrum(0.4, 0.05, 20.0)};
    const ExponentialTensileLaw law(8.0, 0.1);
    const double te0 = tensile_stress(law, 1.15);
    for (const auto& k : kernels) {
        const QlvModel model(law, ReducedRelaxation(k));
        StrainHistory h;
        for (int i = 0; i <= 400; ++i) {
            h.times.push_back(0.0125 * i * (1.0 + 0.002 * (i % 7)));
            h.values.push_back(1.15);
        }
        std::sort(h.times.begin(), h.times.end());
        h.times[0] = 0.0;
        const auto direct = qlv_stress_direct(model, h);
        const auto fast = qlv_stress_fast(model, h);
        for (std::size_t i = 0; i < h.size(); ++i) {
            const double t = h.times[i];
            EXPECT_NEAR(direct.stress[i] / te0, model.relaxation()(t), 1e-10) << kernel_name(k) << " t = " << t;
            EXPECT_NEAR(fast.stress[i] / te0, prony_relaxation(model.prony(), t), 1e-10) << kernel_name(k);
        }
    }
}

TEST(Qlv, RampMatchesAnalyticConvolution) {
    const double k = 3.0, r = 0.1, K = 0.3, alpha = 0.7, nu = 2.5;
    const QlvModel model(LinearLaw{k, StrainMeasure::engineering},
                         ReducedRelaxation(PronySpectrum(K, {{alpha, nu}})));
    const auto h = uniform_history(201, 0.01, [r](double t) { return r * t; });
    const auto fast = qlv_stress_fast(model, h);
    const auto direct = qlv_stress_direct(model, h);
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double exact = ramp_response(k, r, K, alpha, nu, h.times[i]);
        EXPECT_NEAR(fast.stress[i], exact, 1e-13);
        EXPECT_NEAR(direct.stress[i], exact, 1e-10);
    }
}

TEST(Qlv, MidpointOracleIsSecondOrder) {
    const double k = 1.0, r = 1.0, K = 0.0, alpha = 1.0, nu = 4.0, T = 2.0;
    const QlvModel model(LinearLaw{k, StrainMeasure::engineering},
                         ReducedRelaxation(PronySpectrum(K, {{alpha, nu}})));
    auto error = [&](std::size_t n) {
        const double dt = T / static_cast<double>(n);
        const auto h = uniform_history(n + 1, dt, [r](double t) { return r * t; });
        const auto s = qlv_stress_direct(model, h, 1);
        double e = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) e = std::max(e, std::abs(s.stress[i] - ramp_response(k, r, K, alpha, nu, h.times[i])));
        return e;
    };
    const double e1 = error(50), e2 = error(100), e3 = error(200);
    EXPECT_NEAR(e1 / e2, 4.0, 0.3);
    EXPECT_NEAR(e2 / e3, 4.0, 0.3);
}

TEST(Qlv, FastMatchesDirectOnRandomHistories) {
    std::mt19937_64 rng(2024);
    const QlvModel model(ExponentialTensileLaw(10.0, 0.05),
                         ReducedRelaxation(FungSpectrum(0.5, 0.01, 100.0), EvalMethod::prony_approximation, 64), 64);
    for (int trial = 0; trial < 100; ++trial) {
        const double T = 10.0;
        const auto h = uniform_history(512, T / 511.0, random_smooth(rng, T));
        const double dev = max_rel_dev(qlv_stress_fast(model, h), qlv_stress_direct(model, h));
        EXPECT_LE(dev, 1e-6) << "trial " << trial;
    }
}

TEST(Qlv, FastMatchesDirectOnNonUniformGrid) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    const QlvModel model(LinearLaw{2.0, StrainMeasure::green},
                         ReducedRelaxation(KelvinParams(1.0, 0.2, 1.0)));
    StrainHistory h;
    h.measure = HistoryMeasure::stretch;
    double t = 0.0;
    for (int i = 0; i < 800; ++i) {
        h.times.push_back(t);
        h.values.push_back(1.0 + 0.1 * std::sin(t));
        t += 0.01 * u(rng);
    }
    EXPECT_LE(max_rel_dev(qlv_stress_fast(model, h), qlv_stress_direct(model, h)), 1e-6);
}

TEST(Qlv, DomainErrorNamesTimeIndex) {
    // Engineering strain reaches -1 (zero stretch) at sample 10.
    const QlvModel model(ExponentialTensileLaw(1.0, 1.0), ReducedRelaxation(ElasticKernel{}));
    const auto h = uniform_history(20, 0.1, [](double t) { return -t; });
    try {
        (void)qlv_stress_fast(model, h);
        FAIL() << "expected a domain error";
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("index"), std::string::npos) << e.what();
    }
    StrainHistory bad = h;
    bad.times[3] = bad.times[2];
    EXPECT_THROW((void)qlv_stress_direct(model, bad), DomainError);
    bad = h;
    bad.times[0] = 0.5;
    EXPECT_THROW((void)qlv_stress_fast(model, bad), DomainError);
}

TEST(Hysteresis, ShoelaceOnKnownPolygon) {
    // Loading along y = x on [0, 1]; unloading along y = x² back to 0.
    LoopBranch load, unload;
    for (int i = 0; i <= 1000; ++i) {
        const double x = i / 1000.0;
        load.strain.push_back(x);
        load.stress.push_back(x);
        unload.strain.push_back(1.0 - x);
        unload.stress.push_back((1.0 - x) * (1.0 - x));
    }
    // Enclosed area 1/2 − 1/3, area under loading 1/2.
    EXPECT_NEAR(hysteresis_ratio(load, unload), (1.0 / 6.0) / 0.5, 1e-6);
    LoopBranch back;
    back.strain.assign(load.strain.rbegin(), load.strain.rend());
    back.stress.assign(load.stress.rbegin(), load.stress.rend());
    EXPECT_NEAR(hysteresis_ratio(load, back), 0.0, 1e-15);
}

TEST(Hysteresis, Errors) {
    EXPECT_THROW(hysteresis_ratio({{0.0, 0.0}, {0.0, 0.0}}, {{0.0, 0.0}, {0.0, 0.0}}), DomainError);
    EXPECT_THROW(hysteresis_ratio({{0.0, 1.0, 0.5}, {0.0, 1.0, 0.5}}, {{1.0, 0.0}, {1.0, 0.0}}), DomainError);
}

TEST(Hysteresis, ElasticModelHasNoLoop) {
    ProtocolSpec spec;
    spec.kind = ProtocolKind::cyclic;
    spec.amplitude = 0.1;
    const QlvModel model(ExponentialTensileLaw(5.0, 1.0), ReducedRelaxation(ElasticKernel{}));
    const auto r = run_cyclic(spec, model);
    EXPECT_NEAR(*r.report.hysteresis_H, 0.0, 1e-12);
}

TEST(Hysteresis, MatchesLinearViscoelasticTheory) {
    // Normalized Kelvin kernel: G = r + (1 − r)e^{−t/τε}.
    const double tau_eps = 1.0, tau_sigma = 4.0, r = tau_eps / tau_sigma;
    const QlvModel model(LinearLaw{1.0, StrainMeasure::engineering},
                         ReducedRelaxation(KelvinParams(1.0, tau_eps, tau_sigma)));
    for (double w : {0.1, 0.5, 1.0, 3.0}) {
        ProtocolSpec spec;
        spec.kind = ProtocolKind::cyclic;
        spec.amplitude = 0.05;
        spec.frequency = w;
        spec.steps_per_cycle = 800;
        spec.cycles = 30;
        const auto res = run_cyclic(spec, model);
        const double x = w * tau_eps;
        const double e1 = r + (1.0 - r) * x * x / (1.0 + x * x);
        const double e2 = (1.0 - r) * x / (1.0 + x * x);
        const double tan_d = e2 / e1;
        const double H = std::numbers::pi * tan_d / (std::numbers::pi * tan_d / 2.0 + 2.0);
        EXPECT_NEAR(*res.report.hysteresis_H / H, 1.0, 2e-3) << "omega = " << w;
    }
}

TEST(Hysteresis, ShapesAcrossFrequency) {
    const LinearLaw law{1.0, StrainMeasure::engineering};
    ProtocolSpec spec;
    spec.kind = ProtocolKind::cyclic;
    spec.amplitude = 0.05;
    spec.steps_per_cycle = 400;
    spec.frequencies = log_space(0.01, 100.0, 17);

    auto sweep = [&](ViscoKernel k) {
        std::vector<double> h;
        for (const auto& p : run_sweep(spec, QlvModel(law, ReducedRelaxation(std::move(k))))) h.push_back(p.hysteresis);
        return h;
    };
    const auto maxwell = sweep(MaxwellParams(1.0, 1.0));
    const auto voigt = sweep(VoigtParams(1.0, 1.0));
    for (std::size_t i = 1; i < maxwell.size(); ++i) {
        EXPECT_LT(maxwell[i], maxwell[i - 1]);
        EXPECT_GT(voigt[i], voigt[i - 1]);
    }
    const double te = 0.1, ts = 10.0;
    const auto kelvin = sweep(KelvinParams(1.0, te, ts));
    const auto peak = static_cast<std::size_t>(std::max_element(kelvin.begin(), kelvin.end()) - kelvin.begin());
    EXPECT_GT(peak, 0u);
    EXPECT_LT(peak, kelvin.size() - 1);
    // Grid point nearest to 1/√(τε·τσ) = 1.
    EXPECT_NEAR(spec.frequencies[peak], 1.0 / std::sqrt(te * ts), 0.5);
}
