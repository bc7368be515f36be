#pragma once

// Classical viscoelastic elements, discrete (Prony) and continuous (Fung)
// relaxation spectra, and the normalized reduced relaxation function built
// from any of them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qlv/error.hpp"
#include "qlv/special.hpp"

namespace qlv {

/// Heaviside step with 1(0) = 1/2.
constexpr double unit_step(double t) noexcept {
    if (t > 0.0) return 1.0;
    if (t < 0.0) return 0.0;
    return 0.5;
}

namespace detail {

inline void require_positive(double v, const std::string& name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(name + " must be > 0, got " + fmt_num(v));
}

}  // namespace detail

// Spring and dashpot in series.
class MaxwellParams {
public:
    MaxwellParams(double mu, double eta) : mu_(mu), eta_(eta) {
        detail::require_positive(mu, "Maxwell mu");
        detail::require_positive(eta, "Maxwell eta");
    }
    double mu() const noexcept { return mu_; }
    double eta() const noexcept { return eta_; }
    double relaxation_time() const noexcept { return eta_ / mu_; }
    friend bool operator==(const MaxwellParams&, const MaxwellParams&) = default;

private:
    double mu_, eta_;
};

// Spring and dashpot in parallel.
class VoigtParams {
public:
    VoigtParams(double mu, double eta) : mu_(mu), eta_(eta) {
        detail::require_positive(mu, "Voigt mu");
        detail::require_positive(eta, "Voigt eta");
    }
    double mu() const noexcept { return mu_; }
    double eta() const noexcept { return eta_; }
    double retardation_time() const noexcept { return eta_ / mu_; }
    friend bool operator==(const VoigtParams&, const VoigtParams&) = default;

private:
    double mu_, eta_;
};

// Standard linear solid: F + τε·Ḟ = E_R(u + τσ·u̇).
class KelvinParams {
public:
    KelvinParams(double relaxed_modulus, double tau_eps, double tau_sigma)
        : er_(relaxed_modulus), tau_eps_(tau_eps), tau_sigma_(tau_sigma) {
        detail::require_positive(relaxed_modulus, "Kelvin E_R");
        detail::require_positive(tau_eps, "Kelvin tau_eps");
        detail::require_positive(tau_sigma, "Kelvin tau_sigma");
        if (tau_eps > tau_sigma) {
            throw DomainError("Kelvin needs tau_eps <= tau_sigma, got " + detail::fmt_num(tau_eps) + " > " +
                              detail::fmt_num(tau_sigma));
        }
    }
    double relaxed_modulus() const noexcept { return er_; }
    double tau_eps() const noexcept { return tau_eps_; }
    double tau_sigma() const noexcept { return tau_sigma_; }
    friend bool operator==(const KelvinParams&, const KelvinParams&) = default;

private:
    double er_, tau_eps_, tau_sigma_;
};

struct PronyTerm {
    double amplitude = 0.0;
    double frequency = 1.0;  // 1/τ
    friend bool operator==(const PronyTerm&, const PronyTerm&) = default;
};

// g(t) = K + Σ αn·exp(−νn t). Frequencies are positive and strictly
// increasing. Amplitudes may carry either sign here (off-diagonal network
// kernels); material kernels additionally require is_dissipative().
class PronySpectrum {
public:
    PronySpectrum() = default;
    PronySpectrum(double equilibrium, std::vector<PronyTerm> terms) : K_(equilibrium), terms_(std::move(terms)) {
        if (!std::isfinite(K_)) throw DomainError("Prony equilibrium term must be finite");
        for (std::size_t n = 0; n < terms_.size(); ++n) {
            const auto& t = terms_[n];
            if (!std::isfinite(t.amplitude)) throw DomainError("Prony amplitude must be finite");
            detail::require_positive(t.frequency, "Prony frequency");
            if (n > 0 && !(t.frequency > terms_[n - 1].frequency)) {
                throw DomainError("Prony frequencies must be strictly increasing");
            }
        }
    }

    double equilibrium() const noexcept { return K_; }
    const std::vector<PronyTerm>& terms() const noexcept { return terms_; }
    std::size_t size() const noexcept { return terms_.size(); }

    // g(0) = K + Σαn.
    double initial_value() const noexcept {
        double s = K_;
        for (const auto& t : terms_) s += t.amplitude;
        return s;
    }

    bool is_dissipative() const noexcept {
        return K_ >= 0.0 && std::all_of(terms_.begin(), terms_.end(), [](const PronyTerm& t) { return t.amplitude >= 0.0; });
    }

    // Same spectrum scaled so that g(0) = 1.
    PronySpectrum normalized() const {
        const double g0 = initial_value();
        if (!(g0 > 0.0)) throw DomainError("cannot normalize a Prony spectrum with g(0) <= 0");
        std::vector<PronyTerm> t = terms_;
        for (auto& term : t) term.amplitude /= g0;
        return PronySpectrum(K_ / g0, std::move(t));
    }

    friend bool operator==(const PronySpectrum&, const PronySpectrum&) = default;

private:
    double K_ = 0.0;
    std::vector<PronyTerm> terms_;
};

// Continuous spectrum S(q) = c/q on [q1, q2].
class FungSpectrum {
public:
    FungSpectrum(double c, double q1, double q2) : c_(c), q1_(q1), q2_(q2) {
        detail::require_positive(c, "Fung spectrum c");
        detail::require_positive(q1, "Fung spectrum q1");
        detail::require_positive(q2, "Fung spectrum q2");
        if (!(q1 < q2)) {
            throw DomainError("Fung spectrum needs q1 < q2, got q1 = " + detail::fmt_num(q1) + ", q2 = " +
                              detail::fmt_num(q2));
        }
    }
    double c() const noexcept { return c_; }
    double q1() const noexcept { return q1_; }
    double q2() const noexcept { return q2_; }
    // G(∞) = 1 / (1 + c ln(q2/q1)).
    double equilibrium() const noexcept { return 1.0 / (1.0 + c_ * std::log(q2_ / q1_)); }
    friend bool operator==(const FungSpectrum&, const FungSpectrum&) = default;

private:
    double c_, q1_, q2_;
};

// ---------------------------------------------------------------------------
// Creep and relaxation functions.

/// c(t) = (1/μ + t/η)·1(t)
inline double maxwell_creep(const MaxwellParams& p, double t) {
    return (1.0 / p.mu() + t / p.eta()) * unit_step(t);
}

/// g(t) = μ·exp(−μt/η)·1(t)
inline double maxwell_relaxation(const MaxwellParams& p, double t) {
    if (t < 0.0) return 0.0;
    return p.mu() * std::exp(-t / p.relaxation_time()) * unit_step(t);
}

/// c(t) = (1/μ)(1 − exp(−μt/η))·1(t)
inline double voigt_creep(const VoigtParams& p, double t) {
    if (t <= 0.0) return 0.0;
    return -std::expm1(-t / p.retardation_time()) / p.mu();
}

// g(t) = η·δ(t) + μ·1(t), split into the Dirac weight and the regular part.
struct VoigtRelaxation {
    double impulse = 0.0;
    double regular = 0.0;
};

inline VoigtRelaxation voigt_relaxation(const VoigtParams& p, double t) {
    return {p.eta(), p.mu() * unit_step(t)};
}

/// c(t) = (1/E_R)(1 − (1 − τε/τσ)·exp(−t/τσ))·1(t)
inline double kelvin_creep(const KelvinParams& p, double t) {
    if (t < 0.0) return 0.0;
    const double r = p.tau_eps() / p.tau_sigma();
    return (1.0 - (1.0 - r) * std::exp(-t / p.tau_sigma())) / p.relaxed_modulus() * unit_step(t);
}

/// g(t) = E_R(1 − (1 − τσ/τε)·exp(−t/τε))·1(t)
inline double kelvin_relaxation(const KelvinParams& p, double t) {
    if (t < 0.0) return 0.0;
    const double r = p.tau_sigma() / p.tau_eps();
    return p.relaxed_modulus() * (1.0 - (1.0 - r) * std::exp(-t / p.tau_eps())) * unit_step(t);
}

/// g(t) = K + Σ αn·exp(−νn t) for t >= 0.
inline double prony_relaxation(const PronySpectrum& s, double t) {
    if (t < 0.0) throw DomainError("Prony relaxation needs t >= 0, got " + detail::fmt_num(t));
    double g = s.equilibrium();
    for (const auto& term : s.terms()) g += term.amplitude * std::exp(-term.frequency * t);
    return g;
}

/// G(t) = [1 + c(E1(t/q2) − E1(t/q1))] / [1 + c·ln(q2/q1)]
inline double fung_reduced_relaxation(const FungSpectrum& s, double t) {
    if (t < 0.0 || std::isnan(t)) throw DomainError("Fung relaxation needs t >= 0, got " + detail::fmt_num(t));
    if (t == 0.0) return 1.0;
    const double denom = 1.0 + s.c() * std::log(s.q2() / s.q1());
    return (1.0 + s.c() * expint_e1_difference(t / s.q2(), t / s.q1())) / denom;
}

namespace detail {

// Adaptive Simpson on [a, b].
template <class F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                        int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    // The tolerance halves with each split; once the correction is at the
    // rounding level of the panel it cannot shrink further.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(left) + std::abs(right));
    if (depth <= 0 || std::abs(delta) <= std::max(15.0 * tol, noise)) return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double integrate(const F& f, double a, double b, double tol) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace detail

// Same function as fung_reduced_relaxation, by adaptive quadrature of the
// spectrum integral in log q.
inline double fung_reduced_relaxation_quadrature(const FungSpectrum& s, double t) {
    if (t < 0.0) throw DomainError("Fung relaxation needs t >= 0, got " + detail::fmt_num(t));
    const double a = std::log(s.q1()), b = std::log(s.q2());
    const double integral = detail::integrate([t](double lq) { return std::exp(-t * std::exp(-lq)); }, a, b, 1e-14);
    return (1.0 + s.c() * integral) / (1.0 + s.c() * (b - a));
}

/// Discretizes the Fung spectrum into n log-spaced Kelvin bodies (midpoint
/// rule in ln q), normalized so G(0) = 1.
inline PronySpectrum fung_to_prony(const FungSpectrum& s, std::size_t n_terms) {
    if (n_terms < 2) throw DomainError("fung_to_prony needs at least 2 terms, got " + std::to_string(n_terms));
    const double span = std::log(s.q2() / s.q1());
    const double h = span / static_cast<double>(n_terms);
    const double denom = 1.0 + s.c() * span;
    std::vector<PronyTerm> terms(n_terms);
    for (std::size_t k = 0; k < n_terms; ++k) {
        const double q = s.q1() * std::exp((static_cast<double>(k) + 0.5) * h);
        // Largest q gives the smallest frequency; fill back to front.
        terms[n_terms - 1 - k] = {s.c() * h / denom, 1.0 / q};
    }
    return PronySpectrum(1.0 / denom, std::move(terms));
}

// ---------------------------------------------------------------------------
// Normalized reduced relaxation G(t), G(0) = 1.

// G ≡ 1.
struct ElasticKernel {
    friend bool operator==(const ElasticKernel&, const ElasticKernel&) = default;
};

using ViscoKernel = std::variant<ElasticKernel, MaxwellParams, VoigtParams, KelvinParams, PronySpectrum, FungSpectrum>;

enum class EvalMethod { closed_form, quadrature, prony_approximation };

inline const char* kernel_name(const ViscoKernel& k) {
    constexpr const char* names[] = {"elastic", "maxwell", "voigt", "kelvin", "prony", "fung"};
    return names[k.index()];
}

/// Exact Prony form of the normalized regular part. Maxwell, Kelvin, Voigt
/// and discrete spectra are represented exactly; the Fung spectrum is
/// discretized with n_terms.
inline PronySpectrum normalized_prony(const ViscoKernel& kernel, std::size_t n_terms = 64) {
    struct Visitor {
        std::size_t n;
        PronySpectrum operator()(const ElasticKernel&) const { return PronySpectrum(1.0, {}); }
        PronySpectrum operator()(const MaxwellParams& p) const {
            return PronySpectrum(0.0, {{1.0, 1.0 / p.relaxation_time()}});
        }
        PronySpectrum operator()(const VoigtParams&) const { return PronySpectrum(1.0, {}); }
        PronySpectrum operator()(const KelvinParams& p) const {
            // One Kelvin body: q = τε, S = τσ/τε − 1.
            const double r = p.tau_eps() / p.tau_sigma();
            if (r == 1.0) return PronySpectrum(1.0, {});
            return PronySpectrum(r, {{1.0 - r, 1.0 / p.tau_eps()}});
        }
        PronySpectrum operator()(const PronySpectrum& s) const { return s.normalized(); }
        PronySpectrum operator()(const FungSpectrum& s) const { return fung_to_prony(s, n); }
    };
    return std::visit(Visitor{n_terms}, kernel);
}

class ReducedRelaxation {
public:
    explicit ReducedRelaxation(ViscoKernel kernel, EvalMethod method = EvalMethod::closed_form,
                               std::size_t prony_terms = 64)
        : kernel_(std::move(kernel)), method_(method), prony_terms_(prony_terms) {
        if (const auto* s = std::get_if<PronySpectrum>(&kernel_)) {
            if (!s->is_dissipative()) throw DomainError("relaxation spectrum needs K >= 0 and amplitudes >= 0");
            if (!(s->initial_value() > 0.0)) throw DomainError("relaxation spectrum needs g(0) > 0");
        }
        if (method_ == EvalMethod::prony_approximation) approximation_ = normalized_prony(kernel_, prony_terms_);
    }

    const ViscoKernel& kernel() const noexcept { return kernel_; }
    EvalMethod method() const noexcept { return method_; }
    std::size_t prony_terms() const noexcept { return prony_terms_; }

    /// Regular part of G(t) for t >= 0.
    double operator()(double t) const {
        if (t < 0.0) return 0.0;
        if (method_ == EvalMethod::prony_approximation) return prony_relaxation(approximation_, t);
        struct Visitor {
            double t;
            EvalMethod method;
            double operator()(const ElasticKernel&) const { return 1.0; }
            double operator()(const MaxwellParams& p) const { return std::exp(-t / p.relaxation_time()); }
            double operator()(const VoigtParams&) const { return 1.0; }
            double operator()(const KelvinParams& p) const {
                const double r = p.tau_eps() / p.tau_sigma();
                return r + (1.0 - r) * std::exp(-t / p.tau_eps());
            }
            double operator()(const PronySpectrum& s) const { return prony_relaxation(s, t) / s.initial_value(); }
            double operator()(const FungSpectrum& s) const {
                return method == EvalMethod::quadrature ? fung_reduced_relaxation_quadrature(s, t)
                                                        : fung_reduced_relaxation(s, t);
            }
        };
        return std::visit(Visitor{t, method_}, kernel_);
    }

    // Weight of the Dirac term τv·δ(t) (Voigt dashpot), zero otherwise.
    double impulse_time() const noexcept {
        if (const auto* v = std::get_if<VoigtParams>(&kernel_)) return v->retardation_time();
        return 0.0;
    }

    // G(∞).
    double equilibrium() const {
        struct Visitor {
            double operator()(const ElasticKernel&) const { return 1.0; }
            double operator()(const MaxwellParams&) const { return 0.0; }
            double operator()(const VoigtParams&) const { return 1.0; }
            double operator()(const KelvinParams& p) const { return p.tau_eps() / p.tau_sigma(); }
            double operator()(const PronySpectrum& s) const { return s.equilibrium() / s.initial_value(); }
            double operator()(const FungSpectrum& s) const { return s.equilibrium(); }
        };
        return std::visit(Visitor{}, kernel_);
    }

    // Shortest and longest characteristic times.
    std::pair<double, double> time_scales() const {
        struct Visitor {
            std::pair<double, double> operator()(const ElasticKernel&) const { return {1.0, 1.0}; }
            std::pair<double, double> operator()(const MaxwellParams& p) const {
                return {p.relaxation_time(), p.relaxation_time()};
            }
            std::pair<double, double> operator()(const VoigtParams& p) const {
                return {p.retardation_time(), p.retardation_time()};
            }
            std::pair<double, double> operator()(const KelvinParams& p) const { return {p.tau_eps(), p.tau_sigma()}; }
            std::pair<double, double> operator()(const PronySpectrum& s) const {
                if (s.terms().empty()) return {1.0, 1.0};
                return {1.0 / s.terms().back().frequency, 1.0 / s.terms().front().frequency};
            }
            std::pair<double, double> operator()(const FungSpectrum& s) const { return {s.q1(), s.q2()}; }
        };
        return std::visit(Visitor{}, kernel_);
    }

private:
    ViscoKernel kernel_;
    EvalMethod method_;
    std::size_t prony_terms_;
    PronySpectrum approximation_;
};

/// n log-spaced points per decade covering [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t per_decade) {
    if (!(lo > 0.0) || !(hi > lo)) throw DomainError("log_grid needs 0 < lo < hi");
    const double decades = std::log10(hi / lo);
    const auto n = static_cast<std::size_t>(std::ceil(decades * static_cast<double>(per_decade))) + 1;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = lo * std::pow(10.0, decades * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    g.back() = hi;
    return g;
}

/// Max |G_prony − G| over a log grid spanning a decade beyond the kernel's time scales.
inline double prony_approximation_error(const ReducedRelaxation& exact, const PronySpectrum& prony) {
    const auto [lo, hi] = exact.time_scales();
    double err = std::abs(prony_relaxation(prony, 0.0) - exact(0.0));
    for (double t : log_grid(lo / 10.0, hi * 10.0, 50)) {
        err = std::max(err, std::abs(prony_relaxation(prony, t) - exact(t)));
    }
    return err;
}

}  // namespace qlv
