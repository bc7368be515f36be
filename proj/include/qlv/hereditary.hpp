#pragma once

// Quasi-linear viscoelastic stress: the hereditary integral
//   T(t) = ∫ G(t − τ) dT^(e)[E(τ)]/dτ dτ
// of a nonlinear instantaneous elastic stress against a normalized reduced
// relaxation function, evaluated either by an O(N·terms) internal-variable
// recursion on a Prony kernel or by an O(N²) direct convolution sum.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qlv/constitutive.hpp"
#include "qlv/error.hpp"
#include "qlv/kernels.hpp"

namespace qlv {

// Which quantity a StrainHistory samples.
enum class HistoryMeasure { stretch, engineering, green };

inline const char* to_string(HistoryMeasure m) {
    switch (m) {
        case HistoryMeasure::stretch: return "stretch";
        case HistoryMeasure::engineering: return "engineering";
        case HistoryMeasure::green: return "green";
    }
    return "?";
}

inline double to_stretch(HistoryMeasure m, double v) {
    switch (m) {
        case HistoryMeasure::stretch:
            detail::require_finite(v, "stretch");
            if (!(v > 0.0)) throw DomainError("stretch must be > 0, got " + detail::fmt_num(v));
            return v;
        case HistoryMeasure::engineering: return stretch_of(StrainMeasure::engineering, v);
        case HistoryMeasure::green: return stretch_of(StrainMeasure::green, v);
    }
    return v;
}

// Piecewise-linear deformation samples. The material is undeformed for t < 0;
// a non-zero first sample is a step applied at t = 0.
struct StrainHistory {
    std::vector<double> times;
    std::vector<double> values;
    HistoryMeasure measure = HistoryMeasure::stretch;

    std::size_t size() const noexcept { return times.size(); }

    void validate() const {
        if (times.empty()) throw DomainError("strain history is empty");
        if (times.size() != values.size()) throw DomainError("strain history: times and values differ in length");
        if (times.front() != 0.0) throw DomainError("strain history must start at t = 0");
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (!std::isfinite(times[i]) || !std::isfinite(values[i])) {
                throw DomainError("strain history: non-finite sample at index " + std::to_string(i));
            }
            if (i > 0 && !(times[i] > times[i - 1])) {
                throw DomainError("strain history: times not strictly increasing at index " + std::to_string(i));
            }
        }
    }
};

struct StressHistory {
    std::vector<double> times;
    std::vector<double> stress;

    std::size_t size() const noexcept { return times.size(); }
};

// An elastic law paired with a reduced relaxation function. The Prony form of
// the relaxation drives the fast evaluator; its max deviation from the exact
// G on a log grid is recorded at construction.
class QlvModel {
public:
    QlvModel(ElasticLaw elastic, ReducedRelaxation relaxation, std::size_t prony_terms = 64)
        : elastic_(std::move(elastic)),
          relaxation_(std::move(relaxation)),
          prony_(normalized_prony(relaxation_.kernel(), prony_terms)),
          prony_error_(prony_approximation_error(relaxation_, prony_)) {}

    const ElasticLaw& elastic() const noexcept { return elastic_; }
    const ReducedRelaxation& relaxation() const noexcept { return relaxation_; }
    const PronySpectrum& prony() const noexcept { return prony_; }
    double prony_error() const noexcept { return prony_error_; }

private:
    ElasticLaw elastic_;
    ReducedRelaxation relaxation_;
    PronySpectrum prony_;
    double prony_error_;
};

namespace detail {

// (1 − e^{−x}) / x
inline double decay_average(double x) {
    if (x < 1e-8) return 1.0 - 0.5 * x;
    return -std::expm1(-x) / x;
}

inline std::vector<double> elastic_stress_samples(const ElasticLaw& law, const StrainHistory& h) {
    std::vector<double> te(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        try {
            te[i] = elastic_stress(law, to_stretch(h.measure, h.values[i]));
        } catch (const DomainError& e) {
            throw DomainError("at time index " + std::to_string(i) + " (t = " + fmt_num(h.times[i]) + "): " + e.what());
        }
    }
    return te;
}

// Left-sided derivative of a piecewise quantity at sample i: three-point
// backward formula where two previous samples exist, two-point at i = 1.
inline double backward_rate(const std::vector<double>& t, const std::vector<double>& f, std::size_t i) {
    if (i == 0) return 0.0;
    const double h1 = t[i] - t[i - 1];
    if (i == 1) return (f[1] - f[0]) / h1;
    const double h2 = t[i - 1] - t[i - 2];
    return f[i] * (2.0 * h1 + h2) / (h1 * (h1 + h2)) - f[i - 1] * (h1 + h2) / (h1 * h2) +
           f[i - 2] * h1 / (h2 * (h1 + h2));
}

struct GaussRule {
    std::vector<double> nodes;    // on [0, 1]
    std::vector<double> weights;  // sum to 1
};

inline GaussRule gauss_legendre(int points) {
    switch (points) {
        case 1: return {{0.5}, {1.0}};
        case 2: {
            const double a = 0.5 / std::sqrt(3.0);
            return {{0.5 - a, 0.5 + a}, {0.5, 0.5}};
        }
        case 3: {
            const double a = 0.5 * std::sqrt(0.6);
            return {{0.5 - a, 0.5, 0.5 + a}, {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};
        }
        case 4: {
            const double x1 = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(1.2));
            const double x2 = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(1.2));
            const double w1 = (18.0 + std::sqrt(30.0)) / 72.0;
            const double w2 = (18.0 - std::sqrt(30.0)) / 72.0;
            return {{0.5 - 0.5 * x2, 0.5 - 0.5 * x1, 0.5 + 0.5 * x1, 0.5 + 0.5 * x2}, {w2, w1, w1, w2}};
        }
        default: throw DomainError("Gauss-Legendre rule supports 1 to 4 points, got " + std::to_string(points));
    }
}

inline bool is_uniform(const std::vector<double>& t) {
    if (t.size() < 3) return true;
    // Compared against the ideal grid, since spacings of i·h carry rounding of
    // order eps·|t| rather than eps·h.
    const double h = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
        const double ideal = t.front() + static_cast<double>(i) * h;
        if (std::abs(t[i] - ideal) > 1e-12 * h + 64.0 * std::numeric_limits<double>::epsilon() * std::abs(ideal)) {
            return false;
        }
    }
    return true;
}

}  // namespace detail

// Incremental form of the fast evaluator. Each advance() consumes the next
// (time, elastic stress) sample; trial() evaluates a candidate sample without
// committing it, for per-step root finding.
class HereditaryIntegrator {
public:
    HereditaryIntegrator(const PronySpectrum& kernel, double impulse_time)
        : kernel_(kernel), impulse_(impulse_time), h_(kernel.size(), 0.0) {}

    // Elastic stress reached by a step at t = 0 from the undeformed state.
    double start(double t0, double te0) {
        for (std::size_t n = 0; n < h_.size(); ++n) h_[n] = kernel_.terms()[n].amplitude * te0;
        t_ = {t0, t0};
        te_ = {te0, te0};
        count_ = 1;
        return kernel_.equilibrium() * te0 + sum(h_);
    }

    double trial(double t, double te) const {
        const double dt = t - t_[0];
        const double d = te - te_[0];
        double s = kernel_.equilibrium() * te;
        refresh(dt);
        for (std::size_t n = 0; n < h_.size(); ++n) s += decay_[n] * h_[n] + weight_[n] * d;
        if (impulse_ != 0.0) s += impulse_ * rate(t, te);
        return s;
    }

    // ∂trial/∂te at time t.
    double trial_slope(double t) const {
        const double dt = t - t_[0];
        double s = kernel_.equilibrium();
        refresh(dt);
        for (double w : weight_) s += w;
        if (impulse_ != 0.0) s += impulse_ * rate_diagonal(t);
        return s;
    }

    double advance(double t, double te) {
        const double stress = trial(t, te);
        const double dt = t - t_[0];
        const double d = te - te_[0];
        refresh(dt);
        for (std::size_t n = 0; n < h_.size(); ++n) h_[n] = decay_[n] * h_[n] + weight_[n] * d;
        t_ = {t, t_[0]};
        te_ = {te, te_[0]};
        ++count_;
        return stress;
    }

private:
    // Per-term decay e^{-νΔt} and weight α·(1 − e^{-νΔt})/(νΔt), reused while
    // the step agrees with the cached one to within rounding of the times.
    void refresh(double dt) const {
        if (std::abs(dt - cached_dt_) <= 1e-10 * dt) return;
        const auto& terms = kernel_.terms();
        decay_.resize(terms.size());
        weight_.resize(terms.size());
        for (std::size_t n = 0; n < terms.size(); ++n) {
            const double x = terms[n].frequency * dt;
            decay_[n] = std::exp(-x);
            weight_[n] = terms[n].amplitude * detail::decay_average(x);
        }
        cached_dt_ = dt;
    }

    static double sum(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }

    // Same three-point backward difference as detail::backward_rate.
    double rate(double t, double te) const {
        const double h1 = t - t_[0];
        if (count_ < 2) return (te - te_[0]) / h1;
        const double h2 = t_[0] - t_[1];
        return te * (2.0 * h1 + h2) / (h1 * (h1 + h2)) - te_[0] * (h1 + h2) / (h1 * h2) +
               te_[1] * h1 / (h2 * (h1 + h2));
    }

    double rate_diagonal(double t) const {
        const double h1 = t - t_[0];
        if (count_ < 2) return 1.0 / h1;
        const double h2 = t_[0] - t_[1];
        return (2.0 * h1 + h2) / (h1 * (h1 + h2));
    }

    const PronySpectrum& kernel_;
    double impulse_;
    std::vector<double> h_;
    std::array<double, 2> t_{};   // last two committed times, newest first
    std::array<double, 2> te_{};
    std::size_t count_ = 0;
    mutable double cached_dt_ = -1.0;
    mutable std::vector<double> decay_;
    mutable std::vector<double> weight_;
};

/// Fast evaluation: per-term internal variables h_n with the exact update
///   h_n <- e^{-ν_nΔt}·h_n + α_n·ΔT^(e)·(1 − e^{-ν_nΔt})/(ν_nΔt),
/// which integrates a linear-in-time elastic stress increment exactly.
inline StressHistory qlv_stress_fast(const QlvModel& model, const StrainHistory& history) {
    history.validate();
    const auto te = detail::elastic_stress_samples(model.elastic(), history);
    HereditaryIntegrator integ(model.prony(), model.relaxation().impulse_time());
    StressHistory out{history.times, std::vector<double>(history.size())};
    out.stress[0] = integ.start(history.times[0], te[0]);
    for (std::size_t i = 1; i < history.size(); ++i) out.stress[i] = integ.advance(history.times[i], te[i]);
    return out;
}

/// Reference evaluation: explicit convolution sum
///   T(t_i) = G(t_i)·T^(e)_0 + Σ_m Ḡ_im·(T^(e)_m − T^(e)_{m−1}),
/// where Ḡ_im averages G(t_i − τ) over interval m with a Gauss-Legendre rule of
/// `points` nodes (1 = midpoint). O(N²); uses a lag table on uniform grids.
inline StressHistory qlv_stress_direct(const QlvModel& model, const StrainHistory& history, int points = 4) {
    history.validate();
    const auto rule = detail::gauss_legendre(points);
    const auto te = detail::elastic_stress_samples(model.elastic(), history);
    const auto& t = history.times;
    const auto& G = model.relaxation();
    const double tv = G.impulse_time();
    const std::size_t N = history.size();

    std::vector<double> inc(N, 0.0);
    std::vector<std::size_t> active;
    for (std::size_t m = 1; m < N; ++m) {
        inc[m] = te[m] - te[m - 1];
        if (inc[m] != 0.0) active.push_back(m);
    }
    auto interval_average = [&](double lo, double width) {
        double s = 0.0;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) s += rule.weights[k] * G(lo + rule.nodes[k] * width);
        return s;
    };

    StressHistory out{t, std::vector<double>(N)};
    const bool uniform = detail::is_uniform(t) && N > 1;
    std::vector<double> lag;
    if (uniform && active.size() > 16) {
        const double h = (t.back() - t.front()) / static_cast<double>(N - 1);
        lag.resize(N);
        for (std::size_t j = 0; j < N; ++j) lag[j] = interval_average(static_cast<double>(j) * h, h);
    }
    for (std::size_t i = 0; i < N; ++i) {
        double s = (te[0] != 0.0) ? G(t[i]) * te[0] : 0.0;
        if (i == 0) s = te[0];
        for (std::size_t m : active) {
            if (m > i) break;
            const double g = lag.empty() ? interval_average(t[i] - t[m], t[m] - t[m - 1]) : lag[i - m];
            s += g * inc[m];
        }
        if (tv != 0.0) s += tv * detail::backward_rate(t, te, i);
        out.stress[i] = s;
    }
    return out;
}

// One branch of a stress-strain loop.
struct LoopBranch {
    std::vector<double> strain;
    std::vector<double> stress;
};

/// H = (area enclosed by the loop) / (area under the loading branch).
///
/// The loop is the closed polygon loading → unloading (shoelace formula). The
/// loading area is the trapezoidal integral of stress above the stress at the
/// start of loading.
inline double hysteresis_ratio(const LoopBranch& loading, const LoopBranch& unloading) {
    auto check = [](const LoopBranch& b, const char* name, bool increasing) {
        if (b.strain.size() != b.stress.size() || b.strain.size() < 2) {
            throw DomainError(std::string(name) + " branch needs >= 2 matching strain/stress samples");
        }
        for (std::size_t i = 1; i < b.strain.size(); ++i) {
            const double d = b.strain[i] - b.strain[i - 1];
            if (increasing ? d < 0.0 : d > 0.0) {
                throw DomainError(std::string(name) + " branch strain is not monotone at index " + std::to_string(i));
            }
        }
    };
    check(loading, "loading", true);
    check(unloading, "unloading", false);

    const double base = loading.stress.front();
    double under = 0.0;
    for (std::size_t i = 1; i < loading.strain.size(); ++i) {
        under += 0.5 * (loading.stress[i] + loading.stress[i - 1] - 2.0 * base) *
                 (loading.strain[i] - loading.strain[i - 1]);
    }
    if (!(std::abs(under) > 0.0)) throw DomainError("hysteresis ratio undefined: zero area under the loading curve");

    std::vector<double> x(loading.strain), y(loading.stress);
    x.insert(x.end(), unloading.strain.begin(), unloading.strain.end());
    y.insert(y.end(), unloading.stress.begin(), unloading.stress.end());
    double twice = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t j = (i + 1) % x.size();
        twice += (x[i] - x[0]) * (y[j] - y[0]) - (x[j] - x[0]) * (y[i] - y[0]);
    }
    return 0.5 * std::abs(twice) / std::abs(under);
}

}  // namespace qlv
