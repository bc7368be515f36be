#pragma once

// JSON run configuration. parse_config() checks every key against the
// schema, collects all problems (each prefixed by its key path) and then
// builds the domain objects once so that constructor invariants surface as
// validation messages too. to_json() emits the effective configuration with
// every default filled in; feeding it back through parse_config() yields the
// same text.

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qlv/constitutive.hpp"
#include "qlv/error.hpp"
#include "qlv/hereditary.hpp"
#include "qlv/io/csv.hpp"
#include "qlv/kernels.hpp"
#include "qlv/network.hpp"
#include "qlv/protocols.hpp"

namespace qlv::io {

using json = nlohmann::ordered_json;

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> errors)
        : std::runtime_error(join(errors)), errors_(std::move(errors)) {}

    const std::vector<std::string>& errors() const noexcept { return errors_; }

private:
    static std::string join(const std::vector<std::string>& e) {
        std::string s;
        for (const auto& m : e) {
            if (!s.empty()) s += '\n';
            s += m;
        }
        return s;
    }
    std::vector<std::string> errors_;
};

// ---------------------------------------------------------------------------
// Plain configuration records.

struct ElasticConfig {
    std::string kind = "exponential";  // linear | exponential | fung
    double k = 1.0;
    StrainMeasure measure = StrainMeasure::engineering;
    double B = 1.0;
    double C = 1.0;
    FungBiaxialParams fung;
};

struct KernelConfig {
    std::string kind = "elastic";  // elastic | maxwell | voigt | kelvin | prony | fung
    double mu = 1.0, eta = 1.0;
    double E_R = 1.0, tau_eps = 1.0, tau_sigma = 1.0;
    double equilibrium = 0.0;
    std::vector<PronyTerm> terms;
    double c = 1.0, q1 = 1.0, q2 = 10.0;
};

struct ModelConfig {
    ElasticConfig elastic;
    KernelConfig kernel;
    std::size_t prony_terms = 64;
    EvalMethod method = EvalMethod::closed_form;
};

struct SweepConfig {
    double min = 0.1;
    double max = 10.0;
    std::size_t count = 9;
};

struct ProtocolConfig {
    ProtocolSpec spec;
    std::optional<SweepConfig> sweep;
    double noise = 0.0;  // relative multiplicative noise on the measured channel
};

struct KernelEntry {
    std::size_t i = 0, j = 0;
    double equilibrium = 0.0;
    std::vector<PronyTerm> terms;
};

struct ConnectionConfig {
    std::size_t i = 0;
    std::ptrdiff_t j = network::kGround;
    double B = 1.0, C = 1.0, rest_length = 1.0;
    double equilibrium = 1.0;
    std::vector<PronyTerm> terms;
};

struct PrescribedConfig {
    std::size_t dof = 0;
    std::vector<double> times, values;
};

struct NetworkConfig {
    std::vector<double> masses;
    std::vector<std::vector<double>> stiffness;
    std::vector<std::vector<double>> damping;
    bool damping_with_kernels = false;
    std::vector<KernelEntry> memory;
    std::vector<KernelEntry> aero;
    std::vector<double> force_times;
    std::vector<std::vector<double>> force_values;
    std::vector<ConnectionConfig> connections;
    std::vector<PrescribedConfig> prescribed;
    std::vector<double> q0, v0;
    network::InitialHistory history = network::InitialHistory::relaxed;
    double duration = 1.0;
    double dt = 1e-3;
};

struct OutputConfig {
    std::string path;
    std::size_t stride = 1;
    int precision = 17;
};

struct RunConfig {
    std::optional<ModelConfig> model;
    std::optional<ProtocolConfig> protocol;
    std::optional<NetworkConfig> network;
    OutputConfig output;
};

// ---------------------------------------------------------------------------
// Domain objects from records.

inline ElasticLaw build_elastic(const ElasticConfig& e) {
    if (e.kind == "linear") return LinearLaw{e.k, e.measure};
    if (e.kind == "exponential") return ExponentialTensileLaw(e.B, e.C);
    if (e.kind == "fung") return FungUniaxialLaw{validated(e.fung)};
    throw DomainError("unknown elastic law '" + e.kind + "'");
}

inline ViscoKernel build_kernel(const KernelConfig& k) {
    if (k.kind == "elastic") return ElasticKernel{};
    if (k.kind == "maxwell") return MaxwellParams(k.mu, k.eta);
    if (k.kind == "voigt") return VoigtParams(k.mu, k.eta);
    if (k.kind == "kelvin") return KelvinParams(k.E_R, k.tau_eps, k.tau_sigma);
    if (k.kind == "prony") return PronySpectrum(k.equilibrium, k.terms);
    if (k.kind == "fung") return FungSpectrum(k.c, k.q1, k.q2);
    throw DomainError("unknown kernel '" + k.kind + "'");
}

inline QlvModel build_model(const ModelConfig& m) {
    return QlvModel(build_elastic(m.elastic), ReducedRelaxation(build_kernel(m.kernel), m.method, m.prony_terms),
                    m.prony_terms);
}

inline ProtocolSpec build_protocol(const ProtocolConfig& p, const OutputConfig& out) {
    ProtocolSpec s = p.spec;
    s.stride = out.stride;
    if (p.sweep) s.frequencies = log_space(p.sweep->min, p.sweep->max, p.sweep->count);
    s.validate();
    return s;
}

inline network::SpringMassSystem build_network(const NetworkConfig& c) {
    using network::Matrix;
    using network::Vector;
    const auto n = static_cast<Eigen::Index>(c.masses.size());
    auto to_matrix = [n](const std::vector<std::vector<double>>& rows) {
        Matrix m(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j));
        }
        return m;
    };
    auto to_vector = [](const std::vector<double>& v) {
        return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    network::SpringMassSystem s;
    s.masses = to_vector(c.masses);
    s.stiffness = to_matrix(c.stiffness);
    if (!c.damping.empty()) s.damping = to_matrix(c.damping);
    s.damping_with_kernels = c.damping_with_kernels;
    const auto nn = static_cast<std::size_t>(n * n);
    auto fill = [&](const std::vector<KernelEntry>& entries, std::vector<std::optional<PronySpectrum>>& table) {
        if (entries.empty()) return;
        table.assign(nn, std::nullopt);
        for (const auto& e : entries) table.at(e.i * static_cast<std::size_t>(n) + e.j) = PronySpectrum(e.equilibrium, e.terms);
    };
    fill(c.memory, s.memory);
    fill(c.aero, s.aero);
    s.forces.times = c.force_times;
    for (const auto& f : c.force_values) s.forces.values.push_back(to_vector(f));
    for (const auto& cc : c.connections) {
        network::Connection con;
        con.i = cc.i;
        con.j = cc.j;
        con.law = ExponentialTensileLaw(cc.B, cc.C);
        con.rest_length = cc.rest_length;
        con.relaxation = PronySpectrum(cc.equilibrium, cc.terms);
        s.connections.push_back(con);
    }
    for (const auto& p : c.prescribed) s.prescribed.push_back({p.dof, p.times, p.values});
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Reading.

namespace detail {

class Diagnostics {
public:
    void add(const std::string& path, const std::string& msg) { errors_.push_back(path + ": " + msg); }
    bool empty() const noexcept { return errors_.empty(); }
    std::size_t size() const noexcept { return errors_.size(); }
    const std::vector<std::string>& errors() const noexcept { return errors_; }

private:
    std::vector<std::string> errors_;
};

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

inline std::string index_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

// One JSON object under a key path. Every lookup marks the key as known;
// finish() reports the rest as unknown.
class Section {
public:
    Section(const json& j, std::string path, Diagnostics& d) : path_(std::move(path)), d_(d) {
        if (j.is_object()) {
            obj_ = &j;
        } else {
            d_.add(path_.empty() ? "(root)" : path_, "expected an object");
        }
    }
    Section(const Section&) = delete;
    Section& operator=(const Section&) = delete;

    bool ok() const noexcept { return obj_ != nullptr; }
    const std::string& path() const noexcept { return path_; }
    std::string at(const std::string& key) const { return join_path(path_, key); }
    Diagnostics& diagnostics() const noexcept { return d_; }

    bool has(const std::string& key) {
        known_.insert(key);
        return obj_ && obj_->contains(key);
    }

    const json* get(const std::string& key) { return has(key) ? &(*obj_)[key] : nullptr; }

    const json* require(const std::string& key) {
        const json* v = get(key);
        if (!v && obj_) d_.add(at(key), "missing required key");
        return v;
    }

    double number(const std::string& key, double fallback) {
        const json* v = get(key);
        return v ? as_number(*v, at(key), fallback) : fallback;
    }

    double number(const std::string& key) {
        const json* v = require(key);
        return v ? as_number(*v, at(key), std::nan("")) : std::nan("");
    }

    std::size_t count(const std::string& key, std::size_t fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        if (!v->is_number_integer() || v->get<long long>() < 0) {
            d_.add(at(key), "expected a non-negative integer");
            return fallback;
        }
        return v->get<std::size_t>();
    }

    std::ptrdiff_t integer(const std::string& key, std::ptrdiff_t fallback, bool required = false) {
        const json* v = required ? require(key) : get(key);
        if (!v) return fallback;
        if (!v->is_number_integer()) {
            d_.add(at(key), "expected an integer");
            return fallback;
        }
        return v->get<std::ptrdiff_t>();
    }

    bool flag(const std::string& key, bool fallback) {
        const json* v = get(key);
        if (!v) return fallback;
        if (!v->is_boolean()) {
            d_.add(at(key), "expected true or false");
            return fallback;
        }
        return v->get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback, const std::vector<std::string>& allowed,
                     bool required = false) {
        const json* v = required ? require(key) : get(key);
        if (!v) return fallback;
        if (!v->is_string()) {
            d_.add(at(key), "expected a string");
            return fallback;
        }
        const auto s = v->get<std::string>();
        if (allowed.empty()) return s;
        for (const auto& a : allowed) {
            if (a == s) return s;
        }
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        d_.add(at(key), "'" + s + "' is not one of: " + list);
        return fallback;
    }

    std::vector<double> numbers(const std::string& key, bool required = false) {
        const json* v = required ? require(key) : get(key);
        if (!v) return {};
        return as_numbers(*v, at(key));
    }

    std::vector<std::vector<double>> rows(const std::string& key, bool required = false) {
        const json* v = required ? require(key) : get(key);
        if (!v) return {};
        if (!v->is_array()) {
            d_.add(at(key), "expected an array of arrays");
            return {};
        }
        std::vector<std::vector<double>> out;
        for (std::size_t r = 0; r < v->size(); ++r) out.push_back(as_numbers((*v)[r], index_path(at(key), r)));
        return out;
    }

    void finish() {
        if (!obj_) return;
        for (const auto& [key, value] : obj_->items()) {
            if (!known_.count(key)) d_.add(at(key), "unknown key");
        }
    }

    double as_number(const json& v, const std::string& path, double fallback) {
        if (!v.is_number()) {
            d_.add(path, "expected a number");
            return fallback;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            d_.add(path, "must be finite");
            return fallback;
        }
        return x;
    }

    std::vector<double> as_numbers(const json& v, const std::string& path) {
        if (!v.is_array()) {
            d_.add(path, "expected an array of numbers");
            return {};
        }
        std::vector<double> out;
        for (std::size_t k = 0; k < v.size(); ++k) out.push_back(as_number(v[k], index_path(path, k), 0.0));
        return out;
    }

private:
    const json* obj_ = nullptr;
    std::string path_;
    Diagnostics& d_;
    std::set<std::string> known_;
};

// Range checks that report the bound.
inline void check_positive(Diagnostics& d, const std::string& path, double v) {
    if (std::isfinite(v) && !(v > 0.0)) d.add(path, "must be > 0 (got " + qlv::detail::fmt_num(v) + ")");
}

inline void check_nonnegative(Diagnostics& d, const std::string& path, double v) {
    if (std::isfinite(v) && v < 0.0) d.add(path, "must be >= 0 (got " + qlv::detail::fmt_num(v) + ")");
}

inline std::vector<PronyTerm> read_terms(Section& s, const std::string& key, bool signed_amplitudes) {
    std::vector<PronyTerm> out;
    const json* arr = s.get(key);
    if (!arr) return out;
    const std::string path = s.at(key);
    if (!arr->is_array()) {
        s.diagnostics().add(path, "expected an array of {amplitude, frequency} objects");
        return out;
    }
    for (std::size_t n = 0; n < arr->size(); ++n) {
        Section t((*arr)[n], index_path(path, n), s.diagnostics());
        PronyTerm term;
        term.amplitude = t.number("amplitude");
        term.frequency = t.number("frequency");
        t.finish();
        if (!t.ok()) continue;
        if (!signed_amplitudes) check_nonnegative(s.diagnostics(), t.at("amplitude"), term.amplitude);
        check_positive(s.diagnostics(), t.at("frequency"), term.frequency);
        if (!out.empty() && std::isfinite(term.frequency) && !(term.frequency > out.back().frequency)) {
            s.diagnostics().add(t.at("frequency"), "frequencies must be strictly increasing (" +
                                                       qlv::detail::fmt_num(term.frequency) + " after " +
                                                       qlv::detail::fmt_num(out.back().frequency) + ")");
        }
        out.push_back(term);
    }
    return out;
}

inline ElasticConfig read_elastic(Section& s) {
    ElasticConfig e;
    auto& d = s.diagnostics();
    e.kind = s.text("kind", e.kind, {"linear", "exponential", "fung"}, true);
    if (e.kind == "linear") {
        e.k = s.number("k");
        check_positive(d, s.at("k"), e.k);
        const auto m = s.text("measure", "engineering", {"engineering", "green"});
        e.measure = m == "green" ? StrainMeasure::green : StrainMeasure::engineering;
    } else if (e.kind == "exponential") {
        e.B = s.number("B");
        e.C = s.number("C");
        check_positive(d, s.at("B"), e.B);
        check_positive(d, s.at("C"), e.C);
    } else if (e.kind == "fung") {
        auto& p = e.fung;
        const std::pair<const char*, double*> fields[] = {
            {"alpha1", &p.alpha1}, {"alpha2", &p.alpha2}, {"alpha3", &p.alpha3}, {"alpha4", &p.alpha4},
            {"a1", &p.a1},         {"a2", &p.a2},         {"a3", &p.a3},         {"a4", &p.a4},
            {"gamma1", &p.gamma1}, {"gamma2", &p.gamma2}, {"gamma4", &p.gamma4}, {"gamma5", &p.gamma5},
            {"c", &p.c}};
        for (const auto& [key, ptr] : fields) *ptr = s.number(key, 0.0);
        p.include_quadratic_group = s.flag("include_quadratic_group", true);
        p.include_third_order = s.flag("include_third_order", true);
        check_nonnegative(d, s.at("c"), p.c);
        if (p.c > 0.0) {
            check_nonnegative(d, s.at("a1"), p.a1);
            check_nonnegative(d, s.at("a2"), p.a2);
            check_nonnegative(d, s.at("a3"), p.a3);
            if (p.a1 >= 0.0 && p.a2 >= 0.0 && p.a1 * p.a2 - p.a4 * p.a4 < 0.0) {
                d.add(s.at("a4"), "needs a1*a2 - a4^2 >= 0 (got " + qlv::detail::fmt_num(p.a1 * p.a2 - p.a4 * p.a4) + ")");
            }
        }
    }
    return e;
}

inline KernelConfig read_kernel(Section& s) {
    KernelConfig k;
    auto& d = s.diagnostics();
    k.kind = s.text("kind", k.kind, {"elastic", "maxwell", "voigt", "kelvin", "prony", "fung"}, true);
    if (k.kind == "maxwell" || k.kind == "voigt") {
        k.mu = s.number("mu");
        k.eta = s.number("eta");
        check_positive(d, s.at("mu"), k.mu);
        check_positive(d, s.at("eta"), k.eta);
    } else if (k.kind == "kelvin") {
        k.E_R = s.number("E_R");
        k.tau_eps = s.number("tau_eps");
        k.tau_sigma = s.number("tau_sigma");
        check_positive(d, s.at("E_R"), k.E_R);
        check_positive(d, s.at("tau_eps"), k.tau_eps);
        check_positive(d, s.at("tau_sigma"), k.tau_sigma);
        if (k.tau_eps > k.tau_sigma) {
            d.add(s.at("tau_eps"), "must be <= tau_sigma (" + qlv::detail::fmt_num(k.tau_eps) + " > " +
                                       qlv::detail::fmt_num(k.tau_sigma) + ")");
        }
    } else if (k.kind == "prony") {
        k.equilibrium = s.number("equilibrium", 0.0);
        check_nonnegative(d, s.at("equilibrium"), k.equilibrium);
        if (!s.require("terms")) return k;
        k.terms = read_terms(s, "terms", false);
        double g0 = k.equilibrium;
        for (const auto& t : k.terms) g0 += t.amplitude;
        if (std::isfinite(g0) && !(g0 > 0.0)) d.add(s.at("terms"), "equilibrium plus amplitudes must be > 0");
    } else if (k.kind == "fung") {
        k.c = s.number("c");
        k.q1 = s.number("q1");
        k.q2 = s.number("q2");
        check_positive(d, s.at("c"), k.c);
        check_positive(d, s.at("q1"), k.q1);
        check_positive(d, s.at("q2"), k.q2);
        if (k.q1 > 0.0 && k.q2 > 0.0 && !(k.q1 < k.q2)) {
            d.add(s.at("q1"), "must be < q2 (q1 = " + qlv::detail::fmt_num(k.q1) + ", q2 = " +
                                  qlv::detail::fmt_num(k.q2) + ")");
        }
    }
    return k;
}

inline ModelConfig read_model(Section& s) {
    ModelConfig m;
    auto& d = s.diagnostics();
    if (const json* e = s.require("elastic")) {
        Section es(*e, s.at("elastic"), d);
        if (es.ok()) m.elastic = read_elastic(es);
        es.finish();
    }
    if (const json* k = s.require("kernel")) {
        Section ks(*k, s.at("kernel"), d);
        if (ks.ok()) m.kernel = read_kernel(ks);
        ks.finish();
    }
    m.prony_terms = s.count("prony_terms", m.prony_terms);
    if (m.prony_terms < 2) d.add(s.at("prony_terms"), "must be >= 2");
    const auto method = s.text("method", "closed_form", {"closed_form", "quadrature", "prony_approximation"});
    m.method = method == "quadrature"            ? EvalMethod::quadrature
               : method == "prony_approximation" ? EvalMethod::prony_approximation
                                                 : EvalMethod::closed_form;
    return m;
}

inline ProtocolConfig read_protocol(Section& s) {
    ProtocolConfig p;
    ProtocolSpec& spec = p.spec;
    auto& d = s.diagnostics();
    const auto kind = s.text("kind", "relaxation", {"tensile", "creep", "relaxation", "cyclic"}, true);
    spec.kind = kind == "tensile" ? ProtocolKind::tensile
                : kind == "creep" ? ProtocolKind::creep
                : kind == "cyclic" ? ProtocolKind::cyclic
                                   : ProtocolKind::relaxation;
    spec.duration = s.number("duration", spec.duration);
    spec.dt = s.number("dt", spec.dt);
    spec.stretch_rate = s.number("stretch_rate", spec.stretch_rate);
    spec.hold_stress = s.number("hold_stress", spec.hold_stress);
    spec.hold_stretch = s.number("hold_stretch", spec.hold_stretch);
    spec.amplitude = s.number("amplitude", spec.amplitude);
    spec.offset = s.number("offset", spec.offset);
    spec.frequency = s.number("frequency", spec.frequency);
    spec.cycles = s.count("cycles", spec.cycles);
    spec.max_cycles = s.count("max_cycles", spec.max_cycles);
    spec.steps_per_cycle = s.count("steps_per_cycle", spec.steps_per_cycle);
    p.noise = s.number("noise", 0.0);

    check_nonnegative(d, s.at("duration"), spec.duration);
    check_positive(d, s.at("dt"), spec.dt);
    check_nonnegative(d, s.at("noise"), p.noise);
    if (p.noise >= 1.0) d.add(s.at("noise"), "must be < 1");
    if (spec.kind == ProtocolKind::tensile) check_positive(d, s.at("stretch_rate"), spec.stretch_rate);
    if (spec.kind == ProtocolKind::relaxation) check_positive(d, s.at("hold_stretch"), spec.hold_stretch);
    if (spec.kind == ProtocolKind::cyclic) {
        check_positive(d, s.at("amplitude"), spec.amplitude);
        check_positive(d, s.at("frequency"), spec.frequency);
        if (!(1.0 + spec.offset > 0.0)) d.add(s.at("offset"), "must be > -1");
        if (spec.steps_per_cycle < 8 || spec.steps_per_cycle % 2 != 0) {
            d.add(s.at("steps_per_cycle"), "must be even and >= 8");
        }
        if (spec.cycles == 0) d.add(s.at("cycles"), "must be >= 1");
        if (spec.max_cycles < spec.cycles) d.add(s.at("max_cycles"), "must be >= cycles");
    }
    if (const json* sw = s.get("sweep")) {
        Section ss(*sw, s.at("sweep"), d);
        SweepConfig sc;
        sc.min = ss.number("min");
        sc.max = ss.number("max");
        sc.count = ss.count("count", sc.count);
        ss.finish();
        check_positive(d, ss.at("min"), sc.min);
        if (sc.min > 0.0 && sc.max < sc.min) d.add(ss.at("max"), "must be >= min");
        if (sc.count == 0) d.add(ss.at("count"), "must be >= 1");
        p.sweep = sc;
    }
    return p;
}

inline std::vector<KernelEntry> read_kernel_table(Section& s, const std::string& key, std::size_t n, bool signed_terms) {
    std::vector<KernelEntry> out;
    const json* arr = s.get(key);
    if (!arr) return out;
    auto& d = s.diagnostics();
    if (!arr->is_array()) {
        d.add(s.at(key), "expected an array of kernel entries");
        return out;
    }
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t e = 0; e < arr->size(); ++e) {
        Section es((*arr)[e], index_path(s.at(key), e), d);
        KernelEntry k;
        const auto i = es.integer("i", 0, true), j = es.integer("j", 0, true);
        k.equilibrium = es.number("equilibrium", 0.0);
        k.terms = read_terms(es, "terms", signed_terms);
        es.finish();
        if (!es.ok()) continue;
        if (i < 0 || static_cast<std::size_t>(i) >= n) d.add(es.at("i"), "must be in [0, " + std::to_string(n) + ")");
        if (j < 0 || static_cast<std::size_t>(j) >= n) d.add(es.at("j"), "must be in [0, " + std::to_string(n) + ")");
        k.i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(i, 0));
        k.j = static_cast<std::size_t>(std::max<std::ptrdiff_t>(j, 0));
        if (!seen.insert({k.i, k.j}).second) d.add(es.path(), "duplicate entry for (i, j)");
        out.push_back(std::move(k));
    }
    return out;
}

inline void check_square(Diagnostics& d, const std::string& path, const std::vector<std::vector<double>>& m,
                         std::size_t n) {
    if (m.size() != n) {
        d.add(path, "expected " + std::to_string(n) + " rows, got " + std::to_string(m.size()));
        return;
    }
    for (std::size_t r = 0; r < n; ++r) {
        if (m[r].size() != n) d.add(index_path(path, r), "expected " + std::to_string(n) + " entries");
    }
}

inline NetworkConfig read_network(Section& s) {
    NetworkConfig c;
    auto& d = s.diagnostics();
    c.masses = s.numbers("masses", true);
    const std::size_t n = c.masses.size();
    if (s.has("masses") && n == 0) d.add(s.at("masses"), "needs at least one mass");
    for (std::size_t i = 0; i < n; ++i) check_positive(d, index_path(s.at("masses"), i), c.masses[i]);

    c.stiffness = s.rows("stiffness", true);
    if (s.has("stiffness")) {
        check_square(d, s.at("stiffness"), c.stiffness, n);
        bool square = c.stiffness.size() == n;
        for (const auto& r : c.stiffness) square = square && r.size() == n;
        if (square) {
            double scale = 1.0;
            for (const auto& r : c.stiffness) {
                for (double v : r) scale = std::max(scale, std::abs(v));
            }
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = i + 1; j < n; ++j) {
                    if (std::abs(c.stiffness[i][j] - c.stiffness[j][i]) > 1e-12 * scale) {
                        d.add(s.at("stiffness") + "[" + std::to_string(i) + "][" + std::to_string(j) + "]",
                              "stiffness must be symmetric");
                    }
                }
            }
        }
    }
    if (s.has("damping")) {
        c.damping = s.rows("damping");
        check_square(d, s.at("damping"), c.damping, n);
    }
    c.damping_with_kernels = s.flag("damping_with_kernels", false);
    c.memory = read_kernel_table(s, "memory_kernels", n, true);
    c.aero = read_kernel_table(s, "aero_kernels", n, true);
    for (std::size_t e = 0; e < c.memory.size(); ++e) {
        const auto& k = c.memory[e];
        if (k.i < c.stiffness.size() && k.j < c.stiffness[k.i].size() &&
            std::abs(k.equilibrium - c.stiffness[k.i][k.j]) > 1e-12 * std::max(1.0, std::abs(c.stiffness[k.i][k.j]))) {
            d.add(index_path(s.at("memory_kernels"), e) + ".equilibrium", "must equal stiffness[i][j]");
        }
    }

    if (const json* f = s.get("forces")) {
        Section fs(*f, s.at("forces"), d);
        c.force_times = fs.numbers("times", true);
        c.force_values = fs.rows("values", true);
        fs.finish();
        if (c.force_times.size() != c.force_values.size()) d.add(fs.at("values"), "needs one row per time");
        for (std::size_t k = 0; k < c.force_values.size(); ++k) {
            if (c.force_values[k].size() != n) d.add(index_path(fs.at("values"), k), "expected " + std::to_string(n) + " entries");
        }
        for (std::size_t k = 1; k < c.force_times.size(); ++k) {
            if (!(c.force_times[k] > c.force_times[k - 1])) {
                d.add(index_path(fs.at("times"), k), "times must be strictly increasing");
            }
        }
    }

    if (const json* arr = s.get("connections")) {
        if (!arr->is_array()) d.add(s.at("connections"), "expected an array");
        for (std::size_t e = 0; arr->is_array() && e < arr->size(); ++e) {
            Section cs((*arr)[e], index_path(s.at("connections"), e), d);
            ConnectionConfig cc;
            const auto i = cs.integer("i", 0, true);
            cc.j = cs.integer("j", network::kGround);
            cc.B = cs.number("B");
            cc.C = cs.number("C");
            cc.rest_length = cs.number("rest_length", 1.0);
            cc.equilibrium = cs.number("equilibrium", 1.0);
            cc.terms = read_terms(cs, "terms", false);
            cs.finish();
            if (!cs.ok()) continue;
            if (i < 0 || static_cast<std::size_t>(i) >= n) d.add(cs.at("i"), "must be in [0, " + std::to_string(n) + ")");
            cc.i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(i, 0));
            if (cc.j < network::kGround || (cc.j >= 0 && static_cast<std::size_t>(cc.j) >= n)) {
                d.add(cs.at("j"), "must be -1 (ground) or in [0, " + std::to_string(n) + ")");
            }
            check_positive(d, cs.at("B"), cc.B);
            check_positive(d, cs.at("C"), cc.C);
            check_positive(d, cs.at("rest_length"), cc.rest_length);
            check_nonnegative(d, cs.at("equilibrium"), cc.equilibrium);
            double g0 = cc.equilibrium;
            for (const auto& t : cc.terms) g0 += t.amplitude;
            if (std::isfinite(g0) && std::abs(g0 - 1.0) > 1e-12) {
                d.add(cs.at("equilibrium"), "equilibrium plus amplitudes must equal 1 (got " + qlv::detail::fmt_num(g0) + ")");
            }
            c.connections.push_back(std::move(cc));
        }
    }

    if (const json* arr = s.get("prescribed")) {
        if (!arr->is_array()) d.add(s.at("prescribed"), "expected an array");
        for (std::size_t e = 0; arr->is_array() && e < arr->size(); ++e) {
            Section ps((*arr)[e], index_path(s.at("prescribed"), e), d);
            PrescribedConfig p;
            const auto dof = ps.integer("dof", 0, true);
            p.times = ps.numbers("times", true);
            p.values = ps.numbers("values", true);
            ps.finish();
            if (!ps.ok()) continue;
            if (dof < 0 || static_cast<std::size_t>(dof) >= n) d.add(ps.at("dof"), "must be in [0, " + std::to_string(n) + ")");
            p.dof = static_cast<std::size_t>(std::max<std::ptrdiff_t>(dof, 0));
            if (p.times.empty()) d.add(ps.at("times"), "needs at least one sample");
            if (p.times.size() != p.values.size()) d.add(ps.at("values"), "needs one value per time");
            for (std::size_t k = 1; k < p.times.size(); ++k) {
                if (!(p.times[k] > p.times[k - 1])) d.add(index_path(ps.at("times"), k), "times must be strictly increasing");
            }
            c.prescribed.push_back(std::move(p));
        }
    }

    c.q0.assign(n, 0.0);
    c.v0.assign(n, 0.0);
    if (const json* init = s.get("initial")) {
        Section is(*init, s.at("initial"), d);
        if (is.has("q")) c.q0 = is.numbers("q");
        if (is.has("v")) c.v0 = is.numbers("v");
        const auto h = is.text("history", "relaxed", {"relaxed", "step"});
        c.history = h == "step" ? network::InitialHistory::step : network::InitialHistory::relaxed;
        is.finish();
        if (c.q0.size() != n) d.add(is.at("q"), "expected " + std::to_string(n) + " entries");
        if (c.v0.size() != n) d.add(is.at("v"), "expected " + std::to_string(n) + " entries");
    }
    c.duration = s.number("duration");
    c.dt = s.number("dt");
    check_nonnegative(d, s.at("duration"), c.duration);
    check_positive(d, s.at("dt"), c.dt);
    return c;
}

inline OutputConfig read_output(Section& s) {
    OutputConfig o;
    auto& d = s.diagnostics();
    o.path = s.text("path", "", {});
    o.stride = s.count("stride", o.stride);
    if (o.stride == 0) d.add(s.at("stride"), "must be >= 1");
    const auto p = s.integer("precision", o.precision);
    if (p < 1 || p > 17) {
        d.add(s.at("precision"), "must be in [1, 17] (got " + std::to_string(p) + ")");
    } else {
        o.precision = static_cast<int>(p);
    }
    return o;
}

}  // namespace detail

/// Validates a parsed JSON document; throws ValidationError with every problem found.
inline RunConfig parse_config(const json& root) {
    detail::Diagnostics d;
    RunConfig cfg;
    detail::Section s(root, "", d);
    if (s.ok()) {
        if (const json* m = s.get("model")) {
            detail::Section ms(*m, "model", d);
            if (ms.ok()) cfg.model = detail::read_model(ms);
            ms.finish();
        }
        if (const json* p = s.get("protocol")) {
            detail::Section ps(*p, "protocol", d);
            if (ps.ok()) cfg.protocol = detail::read_protocol(ps);
            ps.finish();
        }
        if (const json* n = s.get("network")) {
            detail::Section ns(*n, "network", d);
            if (ns.ok()) cfg.network = detail::read_network(ns);
            ns.finish();
        }
        if (const json* o = s.get("output")) {
            detail::Section os(*o, "output", d);
            if (os.ok()) cfg.output = detail::read_output(os);
            os.finish();
        }
        s.finish();
        if (s.has("model") && s.has("network")) {
            d.add("(root)", "'model' and 'network' are mutually exclusive; give exactly one");
        } else if (!s.has("model") && !s.has("network")) {
            d.add("(root)", "exactly one of 'model' or 'network' is required");
        }
        if (s.has("network") && s.has("protocol")) d.add("protocol", "applies to model runs only");
    }

    // Constructors are the final authority; anything they still reject is
    // reported against the section that produced it.
    if (d.empty()) {
        try {
            if (cfg.model) (void)build_model(*cfg.model);
        } catch (const std::exception& e) {
            d.add("model", e.what());
        }
        try {
            if (cfg.protocol) (void)build_protocol(*cfg.protocol, cfg.output);
        } catch (const std::exception& e) {
            d.add("protocol", e.what());
        }
        if (cfg.network) {
            try {
                const auto sys = build_network(*cfg.network);
                (void)network::VerletStepper(sys, cfg.network->dt);
            } catch (const ConfigurationError& e) {
                d.add("network.dt", e.what());
            } catch (const std::exception& e) {
                d.add("network", e.what());
            }
        }
    }
    if (!d.empty()) throw ValidationError(d.errors());
    return cfg;
}

inline RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError({std::string("syntax: ") + e.what()});
    }
    return parse_config(root);
}

// ---------------------------------------------------------------------------
// Effective configuration.

namespace detail {

inline json terms_json(const std::vector<PronyTerm>& terms) {
    json a = json::array();
    for (const auto& t : terms) a.push_back({{"amplitude", t.amplitude}, {"frequency", t.frequency}});
    return a;
}

inline json elastic_json(const ElasticConfig& e) {
    json j{{"kind", e.kind}};
    if (e.kind == "linear") {
        j["k"] = e.k;
        j["measure"] = to_string(e.measure);
    } else if (e.kind == "exponential") {
        j["B"] = e.B;
        j["C"] = e.C;
    } else {
        const auto& p = e.fung;
        j["alpha1"] = p.alpha1;
        j["alpha2"] = p.alpha2;
        j["alpha3"] = p.alpha3;
        j["alpha4"] = p.alpha4;
        j["a1"] = p.a1;
        j["a2"] = p.a2;
        j["a3"] = p.a3;
        j["a4"] = p.a4;
        j["gamma1"] = p.gamma1;
        j["gamma2"] = p.gamma2;
        j["gamma4"] = p.gamma4;
        j["gamma5"] = p.gamma5;
        j["c"] = p.c;
        j["include_quadratic_group"] = p.include_quadratic_group;
        j["include_third_order"] = p.include_third_order;
    }
    return j;
}

inline json kernel_json(const KernelConfig& k) {
    json j{{"kind", k.kind}};
    if (k.kind == "maxwell" || k.kind == "voigt") {
        j["mu"] = k.mu;
        j["eta"] = k.eta;
    } else if (k.kind == "kelvin") {
        j["E_R"] = k.E_R;
        j["tau_eps"] = k.tau_eps;
        j["tau_sigma"] = k.tau_sigma;
    } else if (k.kind == "prony") {
        j["equilibrium"] = k.equilibrium;
        j["terms"] = terms_json(k.terms);
    } else if (k.kind == "fung") {
        j["c"] = k.c;
        j["q1"] = k.q1;
        j["q2"] = k.q2;
    }
    return j;
}

inline const char* method_name(EvalMethod m) {
    switch (m) {
        case EvalMethod::closed_form: return "closed_form";
        case EvalMethod::quadrature: return "quadrature";
        case EvalMethod::prony_approximation: return "prony_approximation";
    }
    return "closed_form";
}

inline json kernel_table_json(const std::vector<KernelEntry>& entries) {
    json a = json::array();
    for (const auto& e : entries) {
        a.push_back({{"i", e.i}, {"j", e.j}, {"equilibrium", e.equilibrium}, {"terms", terms_json(e.terms)}});
    }
    return a;
}

}  // namespace detail

inline json to_json(const RunConfig& cfg) {
    json root = json::object();
    if (cfg.model) {
        const auto& m = *cfg.model;
        root["model"] = {{"elastic", detail::elastic_json(m.elastic)},
                         {"kernel", detail::kernel_json(m.kernel)},
                         {"prony_terms", m.prony_terms},
                         {"method", detail::method_name(m.method)}};
    }
    if (cfg.protocol) {
        const auto& p = *cfg.protocol;
        const auto& s = p.spec;
        json j{{"kind", to_string(s.kind)},
               {"duration", s.duration},
               {"dt", s.dt},
               {"stretch_rate", s.stretch_rate},
               {"hold_stress", s.hold_stress},
               {"hold_stretch", s.hold_stretch},
               {"amplitude", s.amplitude},
               {"offset", s.offset},
               {"frequency", s.frequency},
               {"cycles", s.cycles},
               {"max_cycles", s.max_cycles},
               {"steps_per_cycle", s.steps_per_cycle},
               {"noise", p.noise}};
        if (p.sweep) j["sweep"] = {{"min", p.sweep->min}, {"max", p.sweep->max}, {"count", p.sweep->count}};
        root["protocol"] = j;
    }
    if (cfg.network) {
        const auto& n = *cfg.network;
        json j{{"masses", n.masses}, {"stiffness", n.stiffness}};
        if (!n.damping.empty()) j["damping"] = n.damping;
        j["damping_with_kernels"] = n.damping_with_kernels;
        j["memory_kernels"] = detail::kernel_table_json(n.memory);
        j["aero_kernels"] = detail::kernel_table_json(n.aero);
        if (!n.force_times.empty()) j["forces"] = {{"times", n.force_times}, {"values", n.force_values}};
        json cons = json::array();
        for (const auto& c : n.connections) {
            cons.push_back({{"i", c.i},
                            {"j", c.j},
                            {"B", c.B},
                            {"C", c.C},
                            {"rest_length", c.rest_length},
                            {"equilibrium", c.equilibrium},
                            {"terms", detail::terms_json(c.terms)}});
        }
        j["connections"] = cons;
        json pres = json::array();
        for (const auto& p : n.prescribed) pres.push_back({{"dof", p.dof}, {"times", p.times}, {"values", p.values}});
        j["prescribed"] = pres;
        j["initial"] = {{"q", n.q0},
                        {"v", n.v0},
                        {"history", n.history == network::InitialHistory::step ? "step" : "relaxed"}};
        j["duration"] = n.duration;
        j["dt"] = n.dt;
        root["network"] = j;
    }
    root["output"] = {{"path", cfg.output.path}, {"stride", cfg.output.stride}, {"precision", cfg.output.precision}};
    return root;
}

inline std::string effective_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config(buf.str());
}

}  // namespace qlv::io
