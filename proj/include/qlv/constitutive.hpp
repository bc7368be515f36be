#pragma once

// Nonlinear elastic laws for soft tissue: the exponential uniaxial law and
// the two-dimensional Fung strain-energy function with its stresses.

#include <cmath>
#include <string>
#include <variant>

#include "qlv/error.hpp"

namespace qlv {

namespace detail {

// Largest exponent accepted before reporting overflow.
inline constexpr double kMaxExponent = 700.0;

inline void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw DomainError(std::string(name) + " must be finite, got " + fmt_num(v));
    }
}

// expm1(z) / z with the removable singularity at 0.
inline double expm1_over(double z) {
    if (std::abs(z) < 1e-5) return 1.0 + z / 2.0 + z * z / 6.0;
    return std::expm1(z) / z;
}

}  // namespace detail

// dT/dλ = B·T + C with T(1) = 0.
class ExponentialTensileLaw {
public:
    ExponentialTensileLaw(double B, double C) : B_(B), C_(C) {
        if (!(B > 0.0) || !std::isfinite(B)) throw DomainError("exponential law: B must be > 0, got " + detail::fmt_num(B));
        if (!(C > 0.0) || !std::isfinite(C)) throw DomainError("exponential law: C must be > 0, got " + detail::fmt_num(C));
    }

    double B() const noexcept { return B_; }
    double C() const noexcept { return C_; }

    friend bool operator==(const ExponentialTensileLaw&, const ExponentialTensileLaw&) = default;

private:
    double B_;
    double C_;
};

/// Nominal stress T = (C/B)(exp(B(λ−1)) − 1).
inline double tensile_stress(const ExponentialTensileLaw& law, double lambda) {
    detail::require_finite(lambda, "stretch");
    if (!(lambda > 0.0)) throw DomainError("stretch must be > 0, got " + detail::fmt_num(lambda));
    const double z = law.B() * (lambda - 1.0);
    if (z > detail::kMaxExponent) {
        throw DomainError("exponential law overflows at stretch " + detail::fmt_num(lambda));
    }
    return law.C() / law.B() * std::expm1(z);
}

/// dT/dλ = B·T + C.
inline double tensile_slope(const ExponentialTensileLaw& law, double lambda) {
    return law.B() * tensile_stress(law, lambda) + law.C();
}

struct GreenStrainUniaxial {
    double value = 0.0;
};

inline GreenStrainUniaxial green_strain(double lambda) {
    detail::require_finite(lambda, "stretch");
    if (!(lambda > 0.0)) throw DomainError("stretch must be > 0, got " + detail::fmt_num(lambda));
    return {0.5 * (lambda * lambda - 1.0)};
}

// Inverse of green_strain on λ > 0.
inline double stretch_from_green(double E) {
    detail::require_finite(E, "Green strain");
    if (!(E > -0.5)) throw DomainError("Green strain must be > -0.5, got " + detail::fmt_num(E));
    return std::sqrt(1.0 + 2.0 * E);
}

/// S = F / (λ A0): second Piola-Kirchhoff stress of a uniaxial specimen.
inline double uniaxial_pk2_from_load(double force, double lambda, double area0) {
    detail::require_finite(force, "force");
    if (!(area0 > 0.0)) throw DomainError("reference area must be > 0, got " + detail::fmt_num(area0));
    if (!(lambda > 0.0)) throw DomainError("stretch must be > 0, got " + detail::fmt_num(lambda));
    return force / (lambda * area0);
}

// Two-dimensional Fung strain energy:
//   ρ0W = ½(α1E11² + α2E22² + α3E12² + α3E21² + 2α4E11E22) + ½c·exp(Q)
//   Q   = a1E11² + a2E22² + a3E12² + a3E21² + 2a4E11E22
//         + γ1E11³ + γ2E22³ + γ4E11²E22 + γ5E11E22²
// The γ3 slot of the classical parameter list has no term and is carried only
// so parameter tables keep their usual numbering.
struct FungBiaxialParams {
    double alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0, alpha4 = 0.0;
    double a1 = 0.0, a2 = 0.0, a3 = 0.0, a4 = 0.0;
    double gamma1 = 0.0, gamma2 = 0.0, gamma3 = 0.0, gamma4 = 0.0, gamma5 = 0.0;
    double c = 0.0;
    bool include_quadratic_group = true;
    bool include_third_order = true;

    friend bool operator==(const FungBiaxialParams&, const FungBiaxialParams&) = default;
};

// Checks the invariants and returns the canonical copy (γ's zeroed when the
// third-order group is off). The exponent's quadratic form must be positive
// semidefinite whenever the exponential group is active (c > 0).
inline FungBiaxialParams validated(FungBiaxialParams p) {
    const double all[] = {p.alpha1, p.alpha2, p.alpha3, p.alpha4, p.a1, p.a2, p.a3, p.a4,
                          p.gamma1, p.gamma2, p.gamma3, p.gamma4, p.gamma5, p.c};
    for (double v : all) detail::require_finite(v, "Fung parameter");
    if (p.c < 0.0) throw DomainError("Fung parameter c must be >= 0, got " + detail::fmt_num(p.c));
    if (p.c > 0.0) {
        if (p.a1 < 0.0) throw DomainError("Fung parameter a1 must be >= 0");
        if (p.a2 < 0.0) throw DomainError("Fung parameter a2 must be >= 0");
        if (p.a3 < 0.0) throw DomainError("Fung parameter a3 must be >= 0");
        if (p.a1 * p.a2 - p.a4 * p.a4 < 0.0) throw DomainError("Fung parameters need a1*a2 - a4^2 >= 0");
    }
    if (!p.include_third_order) {
        p.gamma1 = p.gamma2 = p.gamma3 = p.gamma4 = p.gamma5 = 0.0;
    }
    return p;
}

struct BiaxialStrainState {
    double E11 = 0.0, E22 = 0.0, E12 = 0.0, E21 = 0.0;

    static BiaxialStrainState symmetric(double e11, double e22, double e12) { return {e11, e22, e12, e12}; }
};

struct BiaxialStressState {
    double S11 = 0.0, S22 = 0.0, S12 = 0.0;
};

namespace detail {

inline double fung_exponent(const FungBiaxialParams& p, const BiaxialStrainState& e) {
    double q = p.a1 * e.E11 * e.E11 + p.a2 * e.E22 * e.E22 + p.a3 * (e.E12 * e.E12 + e.E21 * e.E21) +
               2.0 * p.a4 * e.E11 * e.E22;
    if (p.include_third_order) {
        q += p.gamma1 * e.E11 * e.E11 * e.E11 + p.gamma2 * e.E22 * e.E22 * e.E22 +
             p.gamma4 * e.E11 * e.E11 * e.E22 + p.gamma5 * e.E11 * e.E22 * e.E22;
    }
    return q;
}

inline double fung_exp_factor(const FungBiaxialParams& p, const BiaxialStrainState& e) {
    if (p.c == 0.0) return 0.0;
    const double q = fung_exponent(p, e);
    if (q > kMaxExponent) throw DomainError("Fung exponent overflows (Q = " + fmt_num(q) + ")");
    return std::exp(q);
}

}  // namespace detail

// Strain energy density. The strain components are used as given, so E12 and
// E21 may be probed independently.
inline double fung_energy(const FungBiaxialParams& params, const BiaxialStrainState& e) {
    const FungBiaxialParams p = validated(params);
    double w = 0.0;
    if (p.include_quadratic_group) {
        w += 0.5 * (p.alpha1 * e.E11 * e.E11 + p.alpha2 * e.E22 * e.E22 +
                    p.alpha3 * (e.E12 * e.E12 + e.E21 * e.E21) + 2.0 * p.alpha4 * e.E11 * e.E22);
    }
    return w + 0.5 * p.c * detail::fung_exp_factor(p, e);
}

// Second Piola-Kirchhoff stress S_ij = ∂(ρ0W)/∂E_ij, with E12 and E21 as
// separate tensor slots (so S12 = α3E12 + c·a3·E12·X):
//   X  = exp(Q)
//   A1 = a1E11 + a4E22 + (3/2)γ1E11² + γ4E11E22 + ½γ5E22²
//   A2 = a2E22 + a4E11 + (3/2)γ2E22² + ½γ4E11² + γ5E11E22
inline BiaxialStressState fung_stress(const FungBiaxialParams& params, const BiaxialStrainState& e) {
    const FungBiaxialParams p = validated(params);
    if (e.E12 != e.E21) {
        throw DomainError("Green strain must be symmetric (E12 = E21)");
    }
    const double x = detail::fung_exp_factor(p, e);
    double A1 = p.a1 * e.E11 + p.a4 * e.E22;
    double A2 = p.a2 * e.E22 + p.a4 * e.E11;
    if (p.include_third_order) {
        A1 += 1.5 * p.gamma1 * e.E11 * e.E11 + p.gamma4 * e.E11 * e.E22 + 0.5 * p.gamma5 * e.E22 * e.E22;
        A2 += 1.5 * p.gamma2 * e.E22 * e.E22 + 0.5 * p.gamma4 * e.E11 * e.E11 + p.gamma5 * e.E11 * e.E22;
    }
    BiaxialStressState s;
    s.S11 = p.c * A1 * x;
    s.S22 = p.c * A2 * x;
    s.S12 = p.c * p.a3 * e.E12 * x;
    if (p.include_quadratic_group) {
        s.S11 += p.alpha1 * e.E11 + p.alpha4 * e.E22;
        s.S22 += p.alpha4 * e.E11 + p.alpha2 * e.E22;
        s.S12 += p.alpha3 * e.E12;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Uniaxial elastic laws consumed by the hereditary integral.

enum class StrainMeasure { engineering, green };

inline const char* to_string(StrainMeasure m) {
    return m == StrainMeasure::green ? "green" : "engineering";
}

// Strain of a uniaxial stretch in the given measure.
inline double strain_of(StrainMeasure m, double lambda) {
    return m == StrainMeasure::green ? green_strain(lambda).value : lambda - 1.0;
}

inline double stretch_of(StrainMeasure m, double strain) {
    if (m == StrainMeasure::green) return stretch_from_green(strain);
    detail::require_finite(strain, "strain");
    const double lambda = 1.0 + strain;
    if (!(lambda > 0.0)) throw DomainError("engineering strain must be > -1, got " + detail::fmt_num(strain));
    return lambda;
}

// T = k·ε, with ε = λ − 1 or the Green strain.
struct LinearLaw {
    double k = 1.0;
    StrainMeasure measure = StrainMeasure::engineering;

    friend bool operator==(const LinearLaw&, const LinearLaw&) = default;
};

// Fung law under uniaxial Green strain (E22 = E12 = 0); stress is S11.
struct FungUniaxialLaw {
    FungBiaxialParams params;

    friend bool operator==(const FungUniaxialLaw&, const FungUniaxialLaw&) = default;
};

using ElasticLaw = std::variant<LinearLaw, ExponentialTensileLaw, FungUniaxialLaw>;

// Strain axis natural to a law; used for reports and the offset-yield rule.
inline StrainMeasure natural_measure(const ElasticLaw& law) {
    if (const auto* lin = std::get_if<LinearLaw>(&law)) return lin->measure;
    if (std::holds_alternative<FungUniaxialLaw>(law)) return StrainMeasure::green;
    return StrainMeasure::engineering;
}

/// Instantaneous elastic stress at stretch λ.
inline double elastic_stress(const ElasticLaw& law, double lambda) {
    struct Visitor {
        double lambda;
        double operator()(const LinearLaw& l) const { return l.k * strain_of(l.measure, lambda); }
        double operator()(const ExponentialTensileLaw& l) const { return tensile_stress(l, lambda); }
        double operator()(const FungUniaxialLaw& l) const {
            return fung_stress(l.params, {green_strain(lambda).value, 0.0, 0.0, 0.0}).S11;
        }
    };
    return std::visit(Visitor{lambda}, law);
}

/// dT^(e)/dλ.
inline double elastic_tangent(const ElasticLaw& law, double lambda) {
    struct Visitor {
        double lambda;
        double operator()(const LinearLaw& l) const {
            if (!(lambda > 0.0)) throw DomainError("stretch must be > 0, got " + detail::fmt_num(lambda));
            return l.measure == StrainMeasure::green ? l.k * lambda : l.k;
        }
        double operator()(const ExponentialTensileLaw& l) const { return tensile_slope(l, lambda); }
        double operator()(const FungUniaxialLaw& l) const {
            // dS11/dE11 · dE/dλ, with dS11/dE11 = α1 + c(∂A1/∂E11 + 2A1²)X on the uniaxial path.
            const FungBiaxialParams p = validated(l.params);
            const double E = green_strain(lambda).value;
            const double x = detail::fung_exp_factor(p, {E, 0.0, 0.0, 0.0});
            const double A1 = p.a1 * E + 1.5 * p.gamma1 * E * E;
            const double dA1 = p.a1 + 3.0 * p.gamma1 * E;
            double d = p.c * (dA1 + 2.0 * A1 * A1) * x;
            if (p.include_quadratic_group) d += p.alpha1;
            return d * lambda;
        }
    };
    return std::visit(Visitor{lambda}, law);
}

}  // namespace qlv
