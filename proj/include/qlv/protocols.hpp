#pragma once

// Virtual mechanical tests on a QLV specimen: constant-rate tensile, creep
// under constant nominal stress, stress relaxation after a stretch step, and
// sinusoidal cycling with hysteresis extraction.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qlv/constitutive.hpp"
#include "qlv/error.hpp"
#include "qlv/hereditary.hpp"
#include "qlv/kernels.hpp"
#include "qlv/series.hpp"

namespace qlv {

enum class ProtocolKind { tensile, creep, relaxation, cyclic };

inline const char* to_string(ProtocolKind k) {
    switch (k) {
        case ProtocolKind::tensile: return "tensile";
        case ProtocolKind::creep: return "creep";
        case ProtocolKind::relaxation: return "relaxation";
        case ProtocolKind::cyclic: return "cyclic";
    }
    return "?";
}

struct ProtocolSpec {
    ProtocolKind kind = ProtocolKind::relaxation;
    double duration = 1.0;
    double dt = 1e-3;
    std::size_t stride = 1;

    double stretch_rate = 0.01;  // tensile: dλ/dt
    double hold_stress = 0.0;    // creep: nominal stress applied at t = 0
    double hold_stretch = 1.1;   // relaxation: stretch applied at t = 0

    // cyclic: λ(t) = 1 + offset + amplitude·(1 − cos(ωt))/2, ω in rad per unit time
    double amplitude = 0.1;
    double offset = 0.0;
    double frequency = 1.0;
    std::size_t cycles = 5;            // minimum simulated cycles
    std::size_t max_cycles = 200;      // cap while waiting for a steady loop
    std::size_t steps_per_cycle = 400;
    std::vector<double> frequencies;   // sweep list

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("protocol dt must be > 0");
        if (!(duration >= 0.0) || !std::isfinite(duration)) throw DomainError("protocol duration must be >= 0");
        if (stride == 0) throw DomainError("protocol stride must be >= 1");
        if (kind == ProtocolKind::cyclic) {
            if (!(1.0 + offset > 0.0)) throw DomainError("cyclic drive must keep stretch > 0");
            if (!(amplitude > 0.0)) throw DomainError("cyclic amplitude must be > 0");
            if (!(frequency > 0.0)) throw DomainError("cyclic frequency must be > 0");
            if (steps_per_cycle < 8 || steps_per_cycle % 2 != 0) {
                throw DomainError("steps_per_cycle must be even and >= 8");
            }
            if (cycles == 0 || max_cycles < cycles) throw DomainError("cycles must be >= 1 and <= max_cycles");
        }
        if (kind == ProtocolKind::relaxation && !(hold_stretch > 0.0)) {
            throw DomainError("relaxation hold stretch must be > 0");
        }
        if (kind == ProtocolKind::tensile && !(stretch_rate > 0.0)) {
            throw DomainError("tensile stretch rate must be > 0");
        }
    }
};

struct TestReport {
    std::optional<double> youngs_modulus;
    std::optional<double> yield_stress;
    std::optional<double> uts;
    std::optional<double> fracture_energy;
    std::vector<double> creep_rate;       // per sample, d(strain)/dt
    std::vector<double> relaxation_rate;  // per sample, d(stress)/dt
    std::optional<double> relaxation_asymptote;
    std::optional<double> hysteresis_H;
    std::vector<double> hysteresis_per_cycle;
    bool steady_state = true;
    StrainMeasure strain_convention = StrainMeasure::engineering;
};

struct ProtocolResult {
    Series series;
    TestReport report;
};

namespace detail {

inline std::size_t step_count(const ProtocolSpec& spec) {
    const double n = spec.duration / spec.dt;
    return static_cast<std::size_t>(std::llround(n));
}

// Centered differences, one-sided at the ends.
inline std::vector<double> slope_samples(const std::vector<double>& t, const std::vector<double>& y) {
    const std::size_t n = t.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    d[0] = (y[1] - y[0]) / (t[1] - t[0]);
    d[n - 1] = (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (y[i + 1] - y[i - 1]) / (t[i + 1] - t[i - 1]);
    return d;
}

inline std::vector<double> strided(const std::vector<double>& v, std::size_t stride) {
    std::vector<double> out;
    out.reserve(v.size() / stride + 1);
    for (std::size_t i = 0; i < v.size(); i += stride) out.push_back(v[i]);
    return out;
}

inline Series make_series(const std::vector<std::pair<std::string, const std::vector<double>*>>& cols,
                          std::size_t stride) {
    Series s;
    for (const auto& [name, col] : cols) s.add(name, strided(*col, stride));
    return s;
}

}  // namespace detail

/// Young's modulus, offset yield, UTS and fracture energy of a stress-strain
/// record starting at zero strain.
inline TestReport tensile_metrics(const std::vector<double>& strain, const std::vector<double>& stress,
                                  StrainMeasure convention) {
    if (strain.size() < 2 || strain.size() != stress.size()) {
        throw DomainError("tensile metrics need >= 2 matching samples");
    }
    TestReport r;
    r.strain_convention = convention;

    // Least-squares slope over the initial 1% strain.
    std::size_t m = 0;
    while (m < strain.size() && strain[m] <= 0.01) ++m;
    m = std::max<std::size_t>(m, 2);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sx += strain[i];
        sy += stress[i];
        sxx += strain[i] * strain[i];
        sxy += strain[i] * stress[i];
    }
    const double dm = static_cast<double>(m);
    const double E = (dm * sxy - sx * sy) / (dm * sxx - sx * sx);
    r.youngs_modulus = E;

    // First crossing of the curve below the 0.2% offset line.
    auto gap = [&](std::size_t i) { return stress[i] - E * (strain[i] - 0.002); };
    for (std::size_t i = 1; i < strain.size(); ++i) {
        const double g0 = gap(i - 1), g1 = gap(i);
        if (g0 > 0.0 && g1 <= 0.0) {
            const double w = g0 / (g0 - g1);
            r.yield_stress = stress[i - 1] + w * (stress[i] - stress[i - 1]);
            break;
        }
    }
    r.uts = *std::max_element(stress.begin(), stress.end());
    double area = 0.0;
    for (std::size_t i = 1; i < strain.size(); ++i) {
        area += 0.5 * (stress[i] + stress[i - 1]) * (strain[i] - strain[i - 1]);
    }
    r.fracture_energy = area;
    return r;
}

/// Constant-rate stretch λ = 1 + rate·t from the undeformed state.
inline ProtocolResult run_tensile(const ProtocolSpec& spec, const QlvModel& model) {
    spec.validate();
    const std::size_t n = detail::step_count(spec);
    if (n == 0) throw DomainError("tensile drive has zero duration: empty series");
    StrainHistory h;
    h.measure = HistoryMeasure::stretch;
    for (std::size_t i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) * spec.dt;
        h.times.push_back(t);
        h.values.push_back(1.0 + spec.stretch_rate * t);
    }
    const auto stress = qlv_stress_fast(model, h).stress;
    const StrainMeasure conv = natural_measure(model.elastic());
    std::vector<double> strain(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) strain[i] = strain_of(conv, h.values[i]);

    ProtocolResult out;
    out.report = tensile_metrics(strain, stress, conv);
    out.series = detail::make_series(
        {{"time", &h.times}, {"stretch", &h.values}, {"strain", &strain}, {"stress", &stress}}, spec.stride);
    return out;
}

/// Constant nominal stress applied at t = 0; stretch found per step by
/// bracketed bisection followed by safeguarded Newton on the QLV relation.
inline ProtocolResult run_creep(const ProtocolSpec& spec, const QlvModel& model) {
    spec.validate();
    const std::size_t n = detail::step_count(spec);
    const double target = spec.hold_stress;
    const ElasticLaw& law = model.elastic();
    const double tv = model.relaxation().impulse_time();
    HereditaryIntegrator integ(model.prony(), tv);

    std::vector<double> times(n + 1), lambda(n + 1, 1.0);
    for (std::size_t i = 0; i <= n; ++i) times[i] = static_cast<double>(i) * spec.dt;

    auto solve = [&](std::size_t idx, double guess, auto&& residual, auto&& slope) {
        auto f = [&](double l) {
            try {
                return residual(l);
            } catch (const DomainError&) {
                return l > 1.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
            }
        };
        double lo = 0.5 * guess, hi = 1.5 * guess;
        double flo = f(lo), fhi = f(hi);
        for (int k = 0; k < 200 && flo > 0.0; ++k) {
            lo *= 0.5;
            flo = f(lo);
        }
        for (int k = 0; k < 200 && fhi < 0.0; ++k) {
            lo = hi;
            flo = fhi;
            hi = 1.0 + 2.0 * (hi - 1.0) + 0.5;
            fhi = f(hi);
        }
        if (!(flo <= 0.0 && fhi >= 0.0)) {
            throw NumericalError("creep: cannot bracket the stretch at step " + std::to_string(idx));
        }
        while (hi - lo > 1e-3 * hi) {
            const double mid = 0.5 * (lo + hi);
            const double fm = f(mid);
            if (fm > 0.0) hi = mid;
            else lo = mid;
        }
        double x = 0.5 * (lo + hi);
        for (int it = 0; it < 100; ++it) {
            const double fx = f(x);
            if (fx == 0.0) return x;
            if (fx > 0.0) hi = x;
            else lo = x;
            const double d = slope(x);
            double next = (d > 0.0 && std::isfinite(d)) ? x - fx / d : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - x) <= 1e-15 * std::abs(x) || hi - lo <= 4e-16 * hi) return next;
            x = next;
        }
        throw NumericalError("creep: root finding did not converge at step " + std::to_string(idx));
    };

    if (target == 0.0) {
        integ.start(0.0, 0.0);
    } else {
        if (tv == 0.0) {
            lambda[0] = solve(
                0, 1.0, [&](double l) { return elastic_stress(law, l) - target; },
                [&](double l) { return elastic_tangent(law, l); });
        }
        integ.start(0.0, elastic_stress(law, lambda[0]));
        for (std::size_t i = 1; i <= n; ++i) {
            const double t = times[i];
            const double dslope = integ.trial_slope(t);
            lambda[i] = solve(
                i, lambda[i - 1], [&](double l) { return integ.trial(t, elastic_stress(law, l)) - target; },
                [&](double l) { return dslope * elastic_tangent(law, l); });
            integ.advance(t, elastic_stress(law, lambda[i]));
        }
    }

    const StrainMeasure conv = natural_measure(law);
    std::vector<double> strain(n + 1), stress(n + 1, target);
    for (std::size_t i = 0; i <= n; ++i) strain[i] = strain_of(conv, lambda[i]);

    ProtocolResult out;
    out.report.strain_convention = conv;
    out.report.creep_rate = detail::slope_samples(times, strain);
    out.series = detail::make_series(
        {{"time", &times}, {"stretch", &lambda}, {"strain", &strain}, {"stress", &stress}}, spec.stride);
    return out;
}

/// Stretch step to hold_stretch at t = 0: stress(t) = G(t)·T^(e)(λ0).
inline ProtocolResult run_relaxation(const ProtocolSpec& spec, const QlvModel& model) {
    spec.validate();
    const std::size_t n = detail::step_count(spec);
    StrainHistory h;
    h.measure = HistoryMeasure::stretch;
    for (std::size_t i = 0; i <= n; ++i) {
        h.times.push_back(static_cast<double>(i) * spec.dt);
        h.values.push_back(spec.hold_stretch);
    }
    const auto stress = qlv_stress_direct(model, h).stress;
    const double te0 = elastic_stress(model.elastic(), spec.hold_stretch);
    std::vector<double> reduced(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        reduced[i] = te0 != 0.0 ? stress[i] / te0 : model.relaxation()(h.times[i]);
    }
    const StrainMeasure conv = natural_measure(model.elastic());
    std::vector<double> strain(h.size(), strain_of(conv, spec.hold_stretch));

    ProtocolResult out;
    out.report.strain_convention = conv;
    out.report.relaxation_rate = detail::slope_samples(h.times, stress);
    out.report.relaxation_asymptote = model.relaxation().equilibrium() * te0;
    out.series = detail::make_series({{"time", &h.times},
                                      {"stretch", &h.values},
                                      {"strain", &strain},
                                      {"stress", &stress},
                                      {"reduced_relaxation", &reduced}},
                                     spec.stride);
    return out;
}

/// Sinusoidal cycling at spec.frequency. Runs at least spec.cycles cycles and
/// continues (up to max_cycles) until, after three transient cycles, H changes
/// by less than 0.1% between cycles. Each cycle's loop is closed by removing
/// the linear stress drift between its start and end before the ratio is taken.
inline ProtocolResult run_cyclic(const ProtocolSpec& spec, const QlvModel& model) {
    spec.validate();
    const ElasticLaw& law = model.elastic();
    const double omega = spec.frequency;
    const std::size_t per = spec.steps_per_cycle;
    const double dt = 2.0 * std::numbers::pi / omega / static_cast<double>(per);
    auto stretch_at = [&](std::size_t k) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(k % per) / static_cast<double>(per);
        return 1.0 + spec.offset + spec.amplitude * 0.5 * (1.0 - std::cos(phase));
    };

    HereditaryIntegrator integ(model.prony(), model.relaxation().impulse_time());
    const StrainMeasure conv = natural_measure(law);
    std::vector<double> times{0.0}, lambda{stretch_at(0)};
    std::vector<double> stress{integ.start(0.0, elastic_stress(law, lambda[0]))};

    TestReport report;
    report.strain_convention = conv;
    report.steady_state = false;
    std::size_t cycle = 0;
    while (cycle < spec.max_cycles) {
        const std::size_t base = cycle * per;
        for (std::size_t k = 1; k <= per; ++k) {
            const std::size_t idx = base + k;
            const double t = static_cast<double>(idx) * dt;
            const double l = stretch_at(idx);
            times.push_back(t);
            lambda.push_back(l);
            stress.push_back(integ.advance(t, elastic_stress(law, l)));
        }
        ++cycle;

        const double drift = stress[base + per] - stress[base];
        LoopBranch load, unload;
        for (std::size_t k = 0; k <= per; ++k) {
            const double s = stress[base + k] - drift * static_cast<double>(k) / static_cast<double>(per);
            const double e = strain_of(conv, lambda[base + k]);
            if (k <= per / 2) {
                load.strain.push_back(e);
                load.stress.push_back(s);
            }
            if (k >= per / 2) {
                unload.strain.push_back(e);
                unload.stress.push_back(s);
            }
        }
        const double H = hysteresis_ratio(load, unload);
        report.hysteresis_per_cycle.push_back(H);
        if (cycle > 3) {
            const double prev = report.hysteresis_per_cycle[cycle - 2];
            if (std::abs(H - prev) <= 1e-3 * std::abs(H) + 1e-14) report.steady_state = true;
        }
        if (cycle >= spec.cycles && report.steady_state) break;
    }
    report.hysteresis_H = report.hysteresis_per_cycle.back();

    std::vector<double> strain(lambda.size());
    for (std::size_t i = 0; i < lambda.size(); ++i) strain[i] = strain_of(conv, lambda[i]);
    ProtocolResult out;
    out.report = std::move(report);
    out.series = detail::make_series(
        {{"time", &times}, {"stretch", &lambda}, {"strain", &strain}, {"stress", &stress}}, spec.stride);
    return out;
}

struct SweepPoint {
    double frequency = 0.0;
    double hysteresis = 0.0;
    std::size_t cycles = 0;
    bool steady_state = false;
};

/// run_cyclic at each of spec.frequencies, in order.
inline std::vector<SweepPoint> run_sweep(const ProtocolSpec& spec, const QlvModel& model) {
    if (spec.frequencies.empty()) throw DomainError("sweep needs at least one frequency");
    std::vector<SweepPoint> out;
    for (double nu : spec.frequencies) {
        ProtocolSpec s = spec;
        s.kind = ProtocolKind::cyclic;
        s.frequency = nu;
        s.stride = 1;
        const auto r = run_cyclic(s, model);
        out.push_back({nu, *r.report.hysteresis_H, r.report.hysteresis_per_cycle.size(), r.report.steady_state});
    }
    return out;
}

/// n log-spaced values on [lo, hi].
inline std::vector<double> log_space(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0) || !(hi >= lo) || n == 0) throw DomainError("log_space needs 0 < lo <= hi and n >= 1");
    if (n == 1) return {lo};
    std::vector<double> v(n);
    const double r = std::log(hi / lo);
    for (std::size_t i = 0; i < n; ++i) v[i] = lo * std::exp(r * static_cast<double>(i) / static_cast<double>(n - 1));
    v.back() = hi;
    return v;
}

}  // namespace qlv
