#pragma once

// Viscoelastic spring-mass network
//   m_i q̈_i + Σ_j ∫ G_ij(t−τ) q̇_j dτ + Σ_j β_ij q̇_j = Σ_j ∫ A_ij(t−τ) q̇_j dτ + F_i^e(t)
// integrated with velocity Verlet; memory and aerodynamic convolutions use
// the exact exponential recursion of the hereditary evaluator.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlv/constitutive.hpp"
#include "qlv/error.hpp"
#include "qlv/hereditary.hpp"
#include "qlv/kernels.hpp"

namespace qlv::network {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Stiffness / flexibility.

struct StabilityResult {
    bool stable = true;
    std::size_t failing_minor = 0;  // 1-based; 0 when stable
    std::vector<double> minors;     // leading principal minors evaluated so far
};

/// Leading principal minors by elimination without pivoting; minor k is the
/// product of the first k pivots. A pivot at or below 1e-12·max|K_ij| fails.
inline StabilityResult stability_check(const Matrix& K) {
    if (K.rows() != K.cols()) {
        throw DomainError("stability_check needs a square matrix, got " + std::to_string(K.rows()) + "x" +
                          std::to_string(K.cols()));
    }
    StabilityResult r;
    const auto n = K.rows();
    if (n == 0) return r;
    const double scale = K.cwiseAbs().maxCoeff();
    const double tol = 1e-12 * (scale > 0.0 ? scale : 1.0);
    Matrix a = K;
    double minor = 1.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double pivot = a(k, k);
        minor *= pivot;
        r.minors.push_back(minor);
        if (!(pivot > tol)) {
            r.stable = false;
            r.failing_minor = static_cast<std::size_t>(k) + 1;
            return r;
        }
        for (Eigen::Index i = k + 1; i < n; ++i) {
            const double f = a(i, k) / pivot;
            a.row(i).tail(n - k) -= f * a.row(k).tail(n - k);
        }
    }
    return r;
}

inline double asymmetry(const Matrix& K) { return (K - K.transpose()).cwiseAbs().maxCoeff(); }

/// C = K⁻¹ by Cholesky.
inline Matrix flexibility_from_stiffness(const Matrix& K) {
    const auto check = stability_check(K);
    if (!check.stable) {
        throw StabilityError("stiffness matrix is not positive definite: leading principal minor " +
                                 std::to_string(check.failing_minor) + " = " + detail::fmt_num(check.minors.back()),
                             check.failing_minor);
    }
    if (asymmetry(K) > 1e-12 * K.cwiseAbs().maxCoeff()) throw DomainError("stiffness matrix is not symmetric");
    Eigen::LLT<Matrix> llt(K);
    if (llt.info() != Eigen::Success) throw StabilityError("Cholesky factorization failed", 0);
    Matrix C = llt.solve(Matrix::Identity(K.rows(), K.cols()));
    return 0.5 * (C + C.transpose());
}

/// 𝒰 = ½ qᵀKq
inline double elastic_energy(const Matrix& K, const Vector& q) {
    if (K.rows() != K.cols() || K.rows() != q.size()) {
        throw DomainError("elastic_energy: dimension mismatch (K is " + std::to_string(K.rows()) + "x" +
                          std::to_string(K.cols()) + ", q has " + std::to_string(q.size()) + ")");
    }
    return 0.5 * q.dot(K * q);
}

/// 𝒰 = ½ QᵀCQ in terms of generalized forces.
inline double elastic_energy_dual(const Matrix& C, const Vector& Q) { return elastic_energy(C, Q); }

// ---------------------------------------------------------------------------
// System definition.

// Piecewise-linear table of generalized forces; held constant outside the
// sampled range. An empty schedule is identically zero.
struct ForceSchedule {
    std::vector<double> times;
    std::vector<Vector> values;

    bool empty() const noexcept { return times.empty(); }

    Vector at(double t, Eigen::Index n) const {
        if (times.empty()) return Vector::Zero(n);
        if (t <= times.front()) return values.front();
        if (t >= times.back()) return values.back();
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        const auto k = static_cast<std::size_t>(it - times.begin());
        const double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
        return (1.0 - w) * values[k - 1] + w * values[k];
    }
};

// Displacement of one degree of freedom driven by a piecewise-linear schedule.
struct PrescribedMotion {
    std::size_t dof = 0;
    std::vector<double> times;
    std::vector<double> values;

    double at(double t) const {
        if (t <= times.front()) return values.front();
        if (t >= times.back()) return values.back();
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        const auto k = static_cast<std::size_t>(it - times.begin());
        const double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
        return (1.0 - w) * values[k - 1] + w * values[k];
    }
};

inline constexpr std::ptrdiff_t kGround = -1;

// Nonlinear spring between dof i and dof j (or ground) following the
// exponential tensile law on its stretch λ = 1 + (q_i − q_j)/L0, with an
// optional normalized relaxation (QLV connection).
struct Connection {
    std::size_t i = 0;
    std::ptrdiff_t j = kGround;
    ExponentialTensileLaw law{1.0, 1.0};
    double rest_length = 1.0;
    PronySpectrum relaxation = PronySpectrum(1.0, {});
};

struct SpringMassSystem {
    Vector masses;
    Matrix stiffness;  // K_ij
    Matrix damping;    // β_ij; empty = none
    // Row-major n×n tables of optional kernels; empty vector = none.
    std::vector<std::optional<PronySpectrum>> memory;
    std::vector<std::optional<PronySpectrum>> aero;
    ForceSchedule forces;
    std::vector<Connection> connections;
    std::vector<PrescribedMotion> prescribed;
    // When memory kernels are present, β is ignored unless this is set.
    bool damping_with_kernels = false;

    Eigen::Index size() const noexcept { return masses.size(); }

    bool has_memory() const {
        return std::any_of(memory.begin(), memory.end(), [](const auto& k) { return k.has_value(); });
    }
    bool uses_damping() const { return damping.size() != 0 && (!has_memory() || damping_with_kernels); }

    void validate() const {
        const auto n = size();
        if (n == 0) throw DomainError("spring-mass system has no degrees of freedom");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!(masses[i] > 0.0) || !std::isfinite(masses[i])) {
                throw DomainError("mass " + std::to_string(i) + " must be > 0, got " + detail::fmt_num(masses[i]));
            }
        }
        if (stiffness.rows() != n || stiffness.cols() != n) throw DomainError("stiffness matrix must be n x n");
        if (!stiffness.allFinite()) throw DomainError("stiffness matrix has non-finite entries");
        const double scale = std::max(1.0, stiffness.cwiseAbs().maxCoeff());
        if (asymmetry(stiffness) > 1e-12 * scale) throw DomainError("stiffness matrix must be symmetric");
        if (damping.size() != 0 && (damping.rows() != n || damping.cols() != n)) {
            throw DomainError("damping matrix must be n x n");
        }
        const auto nn = static_cast<std::size_t>(n * n);
        if (!memory.empty() && memory.size() != nn) throw DomainError("memory kernel table must have n*n entries");
        if (!aero.empty() && aero.size() != nn) throw DomainError("aero kernel table must have n*n entries");
        for (std::size_t e = 0; e < memory.size(); ++e) {
            if (!memory[e]) continue;
            const auto i = static_cast<Eigen::Index>(e) / n, j = static_cast<Eigen::Index>(e) % n;
            if (std::abs(memory[e]->equilibrium() - stiffness(i, j)) > 1e-12 * scale) {
                throw DomainError("memory kernel (" + std::to_string(i) + "," + std::to_string(j) +
                                  ") equilibrium term must equal K_ij");
            }
        }
        for (const auto& f : forces.values) {
            if (f.size() != n) throw DomainError("external force samples must have n entries");
        }
        for (std::size_t k = 1; k < forces.times.size(); ++k) {
            if (!(forces.times[k] > forces.times[k - 1])) throw DomainError("force schedule times must increase");
        }
        if (forces.times.size() != forces.values.size()) throw DomainError("force schedule is ragged");
        for (const auto& c : connections) {
            if (c.i >= static_cast<std::size_t>(n) || c.j >= n || c.j < kGround) {
                throw DomainError("connection references a missing degree of freedom");
            }
            if (!(c.rest_length > 0.0)) throw DomainError("connection rest length must be > 0");
            if (!c.relaxation.is_dissipative() || std::abs(c.relaxation.initial_value() - 1.0) > 1e-12) {
                throw DomainError("connection relaxation must be a normalized dissipative spectrum");
            }
        }
        for (const auto& p : prescribed) {
            if (p.dof >= static_cast<std::size_t>(n)) throw DomainError("prescribed motion references a missing dof");
            if (p.times.empty() || p.times.size() != p.values.size()) {
                throw DomainError("prescribed motion needs matching, non-empty times and values");
            }
        }
    }
};

struct EnergyReport {
    double kinetic = 0.0;              // ½ Σ m v² over free dofs
    double elastic = 0.0;              // ½ qᵀKq + nonlinear connection energy
    double external_work = 0.0;        // work of F^e, aerodynamic and support forces
    double damping_dissipation = 0.0;  // ∫ vᵀβv dt
    double memory_work = 0.0;          // work absorbed by the transient part of memory kernels

    double mechanical() const noexcept { return kinetic + elastic; }
    double dissipation() const noexcept { return damping_dissipation + memory_work; }
};

struct SystemState {
    double time = 0.0;        // start_time + steps·dt, recomputed each step to avoid drift
    double start_time = 0.0;
    std::size_t steps = 0;
    Vector q;
    Vector v;
    Vector a;
    std::vector<double> memory_vars;      // per kernel entry, per term
    std::vector<double> aero_vars;
    std::vector<double> connection_vars;  // per connection, per term
    std::vector<double> connection_force_elastic;
    EnergyReport energy;
};

enum class InitialHistory {
    relaxed,  // held at q(0) long enough for all memory to fade
    step,     // jumped from zero to q(0) at t = 0
};

namespace detail {

inline double connection_stretch(const Connection& c, const Vector& q) {
    const double dj = c.j == kGround ? 0.0 : q[c.j];
    return 1.0 + (q[static_cast<Eigen::Index>(c.i)] - dj) / c.rest_length;
}

// ∫_1^λ T(s) ds · L0
inline double connection_energy(const Connection& c, double lambda) {
    const double B = c.law.B(), C = c.law.C();
    const double x = lambda - 1.0;
    // (C/B)[(e^{Bx} − 1)/B − x] = C x² · (expm1(Bx) − Bx)/(Bx)²
    const double z = B * x;
    double f;
    if (std::abs(z) < 1e-4) f = 0.5 + z / 6.0 + z * z / 24.0;
    else f = (std::expm1(z) - z) / (z * z);
    return c.rest_length * C * x * x * f;
}

}  // namespace detail

// Velocity-Verlet stepper bound to one system and time step.
class VerletStepper {
public:
    VerletStepper(const SpringMassSystem& system, double dt) : sys_(system), dt_(dt) {
        sys_.validate();
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigurationError("time step must be > 0");
        n_ = sys_.size();
        free_.assign(static_cast<std::size_t>(n_), true);
        for (const auto& p : sys_.prescribed) free_[p.dof] = false;
        omega_max_ = max_frequency();
        if (omega_max_ > 0.0 && !(dt < 2.0 / omega_max_)) {
            throw ConfigurationError("time step " + qlv::detail::fmt_num(dt) + " violates the explicit stability bound " +
                                     "dt < 2/omega_max = " + qlv::detail::fmt_num(2.0 / omega_max_));
        }
        if (sys_.uses_damping()) {
            Matrix A = Matrix(sys_.masses.asDiagonal()) + 0.5 * dt_ * sys_.damping;
            for (Eigen::Index i = 0; i < n_; ++i) {
                if (!free_[static_cast<std::size_t>(i)]) {
                    A.row(i).setZero();
                    A(i, i) = 1.0;
                }
            }
            lu_ = A.partialPivLu();
        }
    }

    double omega_max() const noexcept { return omega_max_; }
    double dt() const noexcept { return dt_; }

    SystemState initial_state(const Vector& q0, const Vector& v0, InitialHistory history = InitialHistory::relaxed) const {
        if (q0.size() != n_ || v0.size() != n_) throw DomainError("initial state has the wrong dimension");
        SystemState s;
        s.q = q0;
        s.v = v0;
        for (const auto& p : sys_.prescribed) s.q[static_cast<Eigen::Index>(p.dof)] = p.at(0.0);
        const bool step = history == InitialHistory::step;
        auto init = [&](const std::vector<std::optional<PronySpectrum>>& table, std::vector<double>& vars) {
            for (std::size_t e = 0; e < table.size(); ++e) {
                if (!table[e]) continue;
                const double qj = s.q[static_cast<Eigen::Index>(e % static_cast<std::size_t>(n_))];
                for (const auto& term : table[e]->terms()) vars.push_back(step ? term.amplitude * qj : 0.0);
            }
        };
        init(sys_.memory, s.memory_vars);
        init(sys_.aero, s.aero_vars);
        for (const auto& c : sys_.connections) {
            const double te = tensile_stress(c.law, detail::connection_stretch(c, s.q));
            s.connection_force_elastic.push_back(te);
            for (const auto& term : c.relaxation.terms()) s.connection_vars.push_back(step ? term.amplitude * te : 0.0);
        }
        const Forces f = forces(s, 0.0);
        s.a = accelerations(f, s.v);
        s.energy.kinetic = kinetic(s.v);
        s.energy.elastic = elastic(s.q);
        return s;
    }

    /// Total internal force (elastic, memory, connections) at a state.
    Vector internal_force(const SystemState& s) const { return forces(s, s.time).internal; }

    SystemState advance(const SystemState& s) const {
        SystemState next = s;
        next.steps = s.steps + 1;
        const double t1 = s.start_time + static_cast<double>(next.steps) * dt_;
        const Forces f0 = forces(s, s.time);

        const Vector v_half = s.v + 0.5 * dt_ * s.a;
        next.q = s.q + dt_ * v_half;
        for (const auto& p : sys_.prescribed) next.q[static_cast<Eigen::Index>(p.dof)] = p.at(t1);
        const Vector dq = next.q - s.q;

        update_kernel_vars(sys_.memory, next.memory_vars, dq);
        update_kernel_vars(sys_.aero, next.aero_vars, dq);
        std::size_t off = 0;
        for (std::size_t c = 0; c < sys_.connections.size(); ++c) {
            const auto& conn = sys_.connections[c];
            const double te = tensile_stress(conn.law, detail::connection_stretch(conn, next.q));
            const double d = te - s.connection_force_elastic[c];
            for (const auto& term : conn.relaxation.terms()) {
                const double x = term.frequency * dt_;
                next.connection_vars[off] = std::exp(-x) * next.connection_vars[off] +
                                            term.amplitude * d * qlv::detail::decay_average(x);
                ++off;
            }
            next.connection_force_elastic[c] = te;
        }
        next.time = t1;
        const Forces f1 = forces(next, t1);

        const Vector rhs_force = f1.external + f1.aero - f1.internal;
        if (sys_.uses_damping()) {
            Vector rhs = sys_.masses.cwiseProduct(v_half) + 0.5 * dt_ * rhs_force;
            for (Eigen::Index i = 0; i < n_; ++i) {
                if (!free_[static_cast<std::size_t>(i)]) rhs[i] = dq[i] / dt_;
            }
            next.v = lu_.solve(rhs);
        } else {
            next.v = v_half + 0.5 * dt_ * rhs_force.cwiseQuotient(sys_.masses);
            for (Eigen::Index i = 0; i < n_; ++i) {
                if (!free_[static_cast<std::size_t>(i)]) next.v[i] = dq[i] / dt_;
            }
        }
        next.a = accelerations(f1, next.v);

        // Energy bookkeeping: trapezoidal work over the step.
        auto& e = next.energy;
        Vector dq_free = dq;
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (!free_[static_cast<std::size_t>(i)]) dq_free[i] = 0.0;
        }
        e.external_work += 0.5 * (f0.external + f1.external + f0.aero + f1.aero).dot(dq_free);
        e.memory_work += 0.5 * (f0.transient + f1.transient).dot(dq_free);
        // Supports supply the net force their dofs carry.
        for (const auto& p : sys_.prescribed) {
            const auto i = static_cast<Eigen::Index>(p.dof);
            const double r0 = f0.internal[i] - f0.external[i] - f0.aero[i];
            const double r1 = f1.internal[i] - f1.external[i] - f1.aero[i];
            e.external_work += 0.5 * (r0 + r1) * dq[i];
        }
        if (sys_.uses_damping()) {
            e.damping_dissipation += 0.5 * dt_ * (damping_power(s.v) + damping_power(next.v));
        }
        e.kinetic = kinetic(next.v);
        e.elastic = elastic(next.q);
        return next;
    }

private:
    struct Forces {
        Vector internal;   // K q + memory + connections
        Vector transient;  // memory and connection terms beyond equilibrium
        Vector aero;
        Vector external;
    };

    Forces forces(const SystemState& s, double t) const {
        Forces f{sys_.stiffness * s.q, Vector::Zero(n_), Vector::Zero(n_), sys_.forces.at(t, n_)};
        std::size_t off = 0;
        for (std::size_t e = 0; e < sys_.memory.size(); ++e) {
            if (!sys_.memory[e]) continue;
            const auto i = static_cast<Eigen::Index>(e / static_cast<std::size_t>(n_));
            for (std::size_t k = 0; k < sys_.memory[e]->size(); ++k) f.transient[i] += s.memory_vars[off++];
        }
        off = 0;
        for (std::size_t e = 0; e < sys_.aero.size(); ++e) {
            if (!sys_.aero[e]) continue;
            const auto i = static_cast<Eigen::Index>(e / static_cast<std::size_t>(n_));
            const auto j = static_cast<Eigen::Index>(e % static_cast<std::size_t>(n_));
            f.aero[i] += sys_.aero[e]->equilibrium() * s.q[j];
            for (std::size_t k = 0; k < sys_.aero[e]->size(); ++k) f.aero[i] += s.aero_vars[off++];
        }
        off = 0;
        for (std::size_t c = 0; c < sys_.connections.size(); ++c) {
            const auto& conn = sys_.connections[c];
            const double eq = conn.relaxation.equilibrium() * s.connection_force_elastic[c];
            double tr = 0.0;
            for (std::size_t k = 0; k < conn.relaxation.size(); ++k) tr += s.connection_vars[off++];
            const auto i = static_cast<Eigen::Index>(conn.i);
            f.internal[i] += eq;
            f.transient[i] += tr;
            if (conn.j != kGround) {
                f.internal[conn.j] -= eq;
                f.transient[conn.j] -= tr;
            }
        }
        f.internal += f.transient;
        return f;
    }

    Vector accelerations(const Forces& f, const Vector& v) const {
        Vector net = f.external + f.aero - f.internal;
        if (sys_.uses_damping()) net -= sys_.damping * v;
        Vector a = net.cwiseQuotient(sys_.masses);
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (!free_[static_cast<std::size_t>(i)]) a[i] = 0.0;
        }
        return a;
    }

    void update_kernel_vars(const std::vector<std::optional<PronySpectrum>>& table, std::vector<double>& vars,
                            const Vector& dq) const {
        std::size_t off = 0;
        for (std::size_t e = 0; e < table.size(); ++e) {
            if (!table[e]) continue;
            const double d = dq[static_cast<Eigen::Index>(e % static_cast<std::size_t>(n_))];
            for (const auto& term : table[e]->terms()) {
                const double x = term.frequency * dt_;
                vars[off] = std::exp(-x) * vars[off] + term.amplitude * d * qlv::detail::decay_average(x);
                ++off;
            }
        }
    }

    double kinetic(const Vector& v) const {
        double k = 0.0;
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (free_[static_cast<std::size_t>(i)]) k += 0.5 * sys_.masses[i] * v[i] * v[i];
        }
        return k;
    }

    double elastic(const Vector& q) const {
        double u = 0.5 * q.dot(sys_.stiffness * q);
        for (const auto& c : sys_.connections) {
            u += c.relaxation.equilibrium() * detail::connection_energy(c, detail::connection_stretch(c, q));
        }
        return u;
    }

    double damping_power(const Vector& v) const {
        Vector vf = v;
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (!free_[static_cast<std::size_t>(i)]) vf[i] = 0.0;
        }
        return vf.dot(sys_.damping * vf);
    }

    // Largest natural frequency of (M, K_instantaneous) over the free dofs,
    // with K_instantaneous = G(0) and connection tangents at zero elongation.
    double max_frequency() const {
        Matrix K0 = sys_.stiffness;
        for (std::size_t e = 0; e < sys_.memory.size(); ++e) {
            if (!sys_.memory[e]) continue;
            const auto i = static_cast<Eigen::Index>(e) / n_, j = static_cast<Eigen::Index>(e) % n_;
            K0(i, j) = sys_.memory[e]->initial_value();
        }
        for (const auto& c : sys_.connections) {
            const double k = c.law.C() / c.rest_length;
            const auto i = static_cast<Eigen::Index>(c.i);
            K0(i, i) += k;
            if (c.j != kGround) {
                K0(c.j, c.j) += k;
                K0(i, c.j) -= k;
                K0(c.j, i) -= k;
            }
        }
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (free_[static_cast<std::size_t>(i)]) idx.push_back(i);
        }
        if (idx.empty()) return 0.0;
        const auto m = static_cast<Eigen::Index>(idx.size());
        Matrix A(m, m);
        for (Eigen::Index r = 0; r < m; ++r) {
            for (Eigen::Index c = 0; c < m; ++c) {
                const double kij = 0.5 * (K0(idx[r], idx[c]) + K0(idx[c], idx[r]));
                A(r, c) = kij / std::sqrt(sys_.masses[idx[r]] * sys_.masses[idx[c]]);
            }
        }
        Eigen::SelfAdjointEigenSolver<Matrix> eig(A, Eigen::EigenvaluesOnly);
        const double lmax = eig.eigenvalues().maxCoeff();
        return lmax > 0.0 ? std::sqrt(lmax) : 0.0;
    }

    SpringMassSystem sys_;
    double dt_;
    Eigen::Index n_ = 0;
    std::vector<bool> free_;
    double omega_max_ = 0.0;
    Eigen::PartialPivLU<Matrix> lu_;
};

/// One velocity-Verlet step.
inline SystemState step(const SpringMassSystem& system, const SystemState& state, double dt) {
    return VerletStepper(system, dt).advance(state);
}

struct RecorderSpec {
    std::size_t stride = 1;
};

struct Trajectory {
    std::vector<SystemState> samples;
    EnergyReport final_energy;
};

/// Fixed-step loop over step(); records the initial state, every stride-th
/// step, and the final state.
inline Trajectory simulate(const SpringMassSystem& system, const SystemState& initial, double duration, double dt,
                           RecorderSpec recorder = {}) {
    if (!(duration >= 0.0)) throw ConfigurationError("duration must be >= 0");
    if (recorder.stride == 0) throw ConfigurationError("recorder stride must be >= 1");
    const VerletStepper stepper(system, dt);
    const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
    Trajectory traj;
    traj.samples.push_back(initial);
    SystemState s = initial;
    for (std::size_t k = 1; k <= steps; ++k) {
        s = stepper.advance(s);
        if (!s.q.allFinite()) throw NumericalError("simulation diverged at step " + std::to_string(k));
        if (k % recorder.stride == 0 || k == steps) traj.samples.push_back(s);
    }
    traj.final_energy = s.energy;
    return traj;
}

}  // namespace qlv::network
