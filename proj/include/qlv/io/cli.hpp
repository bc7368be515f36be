#pragma once

// Command-line surface. Exit codes: 0 success, 2 usage or validation
// problems, 1 runtime or numerical failures. Data goes to files; everything
// else goes to the error stream, except `validate`, which prints the
// effective configuration.

#include <cstdint>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qlv/error.hpp"
#include "qlv/fit.hpp"
#include "qlv/io/config.hpp"
#include "qlv/io/csv.hpp"
#include "qlv/kernels.hpp"
#include "qlv/network.hpp"
#include "qlv/protocols.hpp"

namespace qlv::io {

// Bad invocation detected after argument parsing.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CliOptions {
    std::string config;
    std::string out;
    std::optional<double> dt;
    std::optional<double> duration;
    std::uint64_t seed = 0;
    std::string format = "csv";

    // fit
    std::string data;
    std::string target = "law";
    std::size_t terms = 3;
    std::vector<double> frequencies;
    std::string params;

    // kernels
    std::string kernel;
    std::optional<double> tmin, tmax;
    std::size_t per_decade = 20;
};

namespace detail {

inline RunConfig read_config_file(const std::string& path) {
    if (path.empty()) throw UsageError("--config is required");
    std::ifstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config(buf.str());
}

inline std::string output_path(const CliOptions& o, const RunConfig& cfg) {
    if (!o.out.empty()) return o.out;
    if (!cfg.output.path.empty()) return cfg.output.path;
    throw UsageError("no output path: pass --out or set output.path");
}

inline void report_line(std::ostream& err, const std::string& key, double v) {
    err << key << " = " << format_number(v) << '\n';
}

inline void print_report(std::ostream& err, const TestReport& r) {
    err << "strain_convention = " << to_string(r.strain_convention) << '\n';
    if (r.youngs_modulus) report_line(err, "youngs_modulus", *r.youngs_modulus);
    if (r.yield_stress) report_line(err, "yield_stress", *r.yield_stress);
    if (r.uts) report_line(err, "uts", *r.uts);
    if (r.fracture_energy) report_line(err, "fracture_energy", *r.fracture_energy);
    if (r.relaxation_asymptote) report_line(err, "relaxation_asymptote", *r.relaxation_asymptote);
    if (r.hysteresis_H) {
        report_line(err, "hysteresis_H", *r.hysteresis_H);
        err << "cycles = " << r.hysteresis_per_cycle.size() << '\n';
        err << "steady_state = " << (r.steady_state ? "true" : "false") << '\n';
    }
}

// Relative multiplicative noise on one column, reproducible from the seed.
inline void add_noise(std::vector<double>& v, double level, std::uint64_t seed) {
    if (level <= 0.0) return;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (auto& x : v) x *= 1.0 + level * n01(rng);
}

inline std::vector<double>& column_ref(Series& s, const std::string& name) {
    for (std::size_t i = 0; i < s.names.size(); ++i) {
        if (s.names[i] == name) return s.columns[i];
    }
    throw DomainError("series has no column '" + name + "'");
}

inline int run_protocol(const CliOptions& o, ProtocolKind kind, std::ostream& err) {
    RunConfig cfg = read_config_file(o.config);
    if (!cfg.model) throw UsageError("this subcommand needs a 'model' section");
    if (!cfg.protocol) throw UsageError("this subcommand needs a 'protocol' section");
    if (cfg.protocol->spec.kind != kind) {
        throw UsageError(std::string("protocol.kind is '") + to_string(cfg.protocol->spec.kind) +
                         "' but the subcommand runs '" + to_string(kind) + "'");
    }
    if (kind == ProtocolKind::cyclic && (o.dt || o.duration)) {
        throw UsageError("cyclic runs take their step from protocol.steps_per_cycle; --dt and --duration do not apply");
    }
    if (o.dt) cfg.protocol->spec.dt = *o.dt;
    if (o.duration) cfg.protocol->spec.duration = *o.duration;
    cfg = parse_config(to_json(cfg));  // re-validate the overrides
    const std::string path = output_path(o, cfg);

    const QlvModel model = build_model(*cfg.model);
    const ProtocolSpec spec = build_protocol(*cfg.protocol, cfg.output);
    ProtocolResult r;
    switch (kind) {
        case ProtocolKind::tensile: r = run_tensile(spec, model); break;
        case ProtocolKind::creep: r = run_creep(spec, model); break;
        case ProtocolKind::relaxation: r = run_relaxation(spec, model); break;
        case ProtocolKind::cyclic: r = run_cyclic(spec, model); break;
    }
    if (cfg.protocol->noise > 0.0) {
        if (kind == ProtocolKind::creep) {
            auto& strain = column_ref(r.series, "strain");
            auto& stretch = column_ref(r.series, "stretch");
            add_noise(strain, cfg.protocol->noise, o.seed);
            for (std::size_t i = 0; i < strain.size(); ++i) stretch[i] = stretch_of(r.report.strain_convention, strain[i]);
        } else {
            add_noise(column_ref(r.series, "stress"), cfg.protocol->noise, o.seed);
        }
    }
    write_series(r.series, path, cfg.output.precision);
    print_report(err, r.report);
    return 0;
}

inline int run_sweep_command(const CliOptions& o, std::ostream& err) {
    if (o.dt || o.duration) throw UsageError("sweep runs take their step from protocol.steps_per_cycle");
    const RunConfig cfg = read_config_file(o.config);
    if (!cfg.model) throw UsageError("sweep needs a 'model' section");
    if (!cfg.protocol || cfg.protocol->spec.kind != ProtocolKind::cyclic) {
        throw UsageError("sweep needs a cyclic 'protocol' section");
    }
    if (!cfg.protocol->sweep) throw UsageError("sweep needs protocol.sweep {min, max, count}");
    const std::string path = output_path(o, cfg);
    const QlvModel model = build_model(*cfg.model);
    const auto points = run_sweep(build_protocol(*cfg.protocol, cfg.output), model);
    Series s;
    std::vector<double> f, h, c, st;
    for (const auto& p : points) {
        f.push_back(p.frequency);
        h.push_back(p.hysteresis);
        c.push_back(static_cast<double>(p.cycles));
        st.push_back(p.steady_state ? 1.0 : 0.0);
        if (!p.steady_state) err << "warning: no steady loop at frequency " << format_number(p.frequency) << '\n';
    }
    s.add("frequency", f);
    s.add("hysteresis", h);
    s.add("cycles", c);
    s.add("steady_state", st);
    write_series(s, path, cfg.output.precision);
    return 0;
}

inline int run_simulate(const CliOptions& o, std::ostream& err) {
    RunConfig cfg = read_config_file(o.config);
    if (!cfg.network) throw UsageError("simulate needs a 'network' section");
    if (o.dt) cfg.network->dt = *o.dt;
    if (o.duration) cfg.network->duration = *o.duration;
    cfg = parse_config(to_json(cfg));
    const std::string path = output_path(o, cfg);
    const auto& nc = *cfg.network;
    const auto system = build_network(nc);
    const network::VerletStepper stepper(system, nc.dt);
    const auto q0 = Eigen::Map<const network::Vector>(nc.q0.data(), static_cast<Eigen::Index>(nc.q0.size()));
    const auto v0 = Eigen::Map<const network::Vector>(nc.v0.data(), static_cast<Eigen::Index>(nc.v0.size()));
    const auto init = stepper.initial_state(q0, v0, nc.history);
    const auto traj = network::simulate(system, init, nc.duration, nc.dt, {cfg.output.stride});

    const auto n = static_cast<std::size_t>(system.size());
    std::vector<std::vector<double>> q(n), v(n);
    std::vector<double> t, ke, pe, work, damp, mem;
    for (const auto& s : traj.samples) {
        t.push_back(s.time);
        for (std::size_t i = 0; i < n; ++i) {
            q[i].push_back(s.q[static_cast<Eigen::Index>(i)]);
            v[i].push_back(s.v[static_cast<Eigen::Index>(i)]);
        }
        ke.push_back(s.energy.kinetic);
        pe.push_back(s.energy.elastic);
        work.push_back(s.energy.external_work);
        damp.push_back(s.energy.damping_dissipation);
        mem.push_back(s.energy.memory_work);
    }
    Series out;
    out.add("time", t);
    for (std::size_t i = 0; i < n; ++i) out.add("displacement_" + std::to_string(i), q[i]);
    for (std::size_t i = 0; i < n; ++i) out.add("velocity_" + std::to_string(i), v[i]);
    out.add("kinetic", ke);
    out.add("elastic", pe);
    out.add("external_work", work);
    out.add("damping_dissipation", damp);
    out.add("memory_work", mem);
    write_series(out, path, cfg.output.precision);
    report_line(err, "omega_max", stepper.omega_max());
    report_line(err, "final_mechanical_energy", traj.final_energy.mechanical());
    report_line(err, "final_dissipation", traj.final_energy.dissipation());
    return 0;
}

inline Series read_data(const std::string& path) {
    if (path.empty()) throw UsageError("--data is required");
    std::ifstream probe(path);
    if (!probe) throw UsageError("cannot open data file '" + path + "'");
    return read_series(path);
}

inline int run_fit(const CliOptions& o, std::ostream& err) {
    const Series data = read_data(o.data);
    if (o.out.empty()) throw UsageError("fit needs --out");
    Series out;
    json params;
    if (o.target == "law") {
        if (!data.has("stretch") || !data.has("stress")) throw UsageError("law fit needs 'stretch' and 'stress' columns");
        const auto& lam = data.column("stretch");
        const auto& T = data.column("stress");
        const auto fit = fit_exponential_law(lam, T);
        std::vector<double> model(lam.size());
        for (std::size_t i = 0; i < lam.size(); ++i) model[i] = tensile_stress(fit.law, lam[i]);
        out.add(data.names.front(), data.columns.front());
        out.add("stretch", lam);
        out.add("stress", T);
        out.add("fitted_stress", model);
        params = {{"kind", "exponential"}, {"B", fit.law.B()}, {"C", fit.law.C()}};
        report_line(err, "B", fit.law.B());
        report_line(err, "C", fit.law.C());
        report_line(err, "residual_norm", fit.residual_norm);
        err << "iterations = " << fit.iterations << '\n';
        err << "converged = " << (fit.converged ? "true" : "false") << '\n';
        if (fit.B_clamped) err << "warning: fitted B was not positive and was clamped\n";
    } else {
        const std::string col = data.has("reduced_relaxation") ? "reduced_relaxation" : "";
        if (col.empty()) throw UsageError("spectrum fit needs a 'reduced_relaxation' column");
        const auto& t = data.columns.front();
        const auto& G = data.column(col);
        const auto fit = o.frequencies.empty() ? fit_relaxation_spectrum(t, G, o.terms)
                                               : fit_relaxation_spectrum(t, G, o.frequencies);
        std::vector<double> model(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) model[i] = prony_relaxation(fit.spectrum, t[i]);
        out.add(data.names.front(), t);
        out.add(col, G);
        out.add("fitted", model);
        json terms = json::array();
        for (const auto& term : fit.spectrum.terms()) {
            terms.push_back({{"amplitude", term.amplitude}, {"frequency", term.frequency}});
        }
        params = {{"kind", "prony"}, {"equilibrium", fit.spectrum.equilibrium()}, {"terms", terms}};
        report_line(err, "equilibrium", fit.spectrum.equilibrium());
        for (const auto& term : fit.spectrum.terms()) {
            err << "term amplitude = " << format_number(term.amplitude) << ", frequency = " << format_number(term.frequency)
                << '\n';
        }
        report_line(err, "max_error", fit.max_error);
    }
    write_series(out, o.out);
    if (!o.params.empty()) write_text(params.dump(2) + "\n", o.params);
    return 0;
}

// "kelvin:E_R=2,tau_eps=1,tau_sigma=3" or "prony:equilibrium=0.2,terms=0.5@1;0.3@10".
inline json parse_kernel_spec(const std::string& spec) {
    const auto colon = spec.find(':');
    json j{{"kind", spec.substr(0, colon)}};
    if (colon == std::string::npos) return j;
    std::stringstream ss(spec.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw UsageError("kernel parameter '" + item + "' is not key=value");
        const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        if (key == "terms") {
            json terms = json::array();
            std::stringstream ts(value);
            std::string term;
            while (std::getline(ts, term, ';')) {
                const auto at = term.find('@');
                double a, f;
                if (at == std::string::npos || !io::detail::parse_double(term.substr(0, at), a) ||
                    !io::detail::parse_double(term.substr(at + 1), f)) {
                    throw UsageError("Prony term '" + term + "' is not amplitude@frequency");
                }
                terms.push_back({{"amplitude", a}, {"frequency", f}});
            }
            j["terms"] = terms;
        } else {
            double v;
            if (!io::detail::parse_double(value, v)) throw UsageError("kernel parameter '" + key + "' is not a number");
            j[key] = v;
        }
    }
    return j;
}

inline int run_kernels(const CliOptions& o) {
    if (o.out.empty()) throw UsageError("kernels needs --out");
    if (o.config.empty() == o.kernel.empty()) throw UsageError("kernels needs exactly one of --config or --kernel");
    KernelConfig kc;
    if (!o.config.empty()) {
        const RunConfig cfg = read_config_file(o.config);
        if (!cfg.model) throw UsageError("kernels needs a 'model' section");
        kc = cfg.model->kernel;
    } else {
        io::detail::Diagnostics d;
        const json j = parse_kernel_spec(o.kernel);
        io::detail::Section s(j, "kernel", d);
        kc = io::detail::read_kernel(s);
        s.finish();
        if (!d.empty()) throw ValidationError(d.errors());
    }
    const ReducedRelaxation G(build_kernel(kc));
    const auto [tau_lo, tau_hi] = G.time_scales();
    const double lo = o.tmin.value_or(1e-2 * tau_lo), hi = o.tmax.value_or(1e2 * tau_hi);
    if (!(lo > 0.0) || !(hi > lo)) throw UsageError("kernels needs 0 < tmin < tmax");
    if (o.per_decade == 0) throw UsageError("--per-decade must be >= 1");
    const auto t = log_grid(lo, hi, o.per_decade);
    std::vector<double> reduced, relax, creep;
    for (double ti : t) {
        reduced.push_back(G(ti));
        if (const auto* m = std::get_if<MaxwellParams>(&G.kernel())) {
            relax.push_back(maxwell_relaxation(*m, ti));
            creep.push_back(maxwell_creep(*m, ti));
        } else if (const auto* v = std::get_if<VoigtParams>(&G.kernel())) {
            relax.push_back(voigt_relaxation(*v, ti).regular);
            creep.push_back(voigt_creep(*v, ti));
        } else if (const auto* k = std::get_if<KelvinParams>(&G.kernel())) {
            relax.push_back(kelvin_relaxation(*k, ti));
            creep.push_back(kelvin_creep(*k, ti));
        }
    }
    Series s;
    s.add("time", t);
    s.add("reduced_relaxation", reduced);
    if (!relax.empty()) {
        s.add("relaxation", relax);
        s.add("creep", creep);
    }
    write_series(s, o.out);
    return 0;
}

inline int run_validate(const CliOptions& o, std::ostream& out) {
    const RunConfig cfg = read_config_file(o.config);
    out << effective_config(cfg);
    return 0;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Quasi-linear viscoelastic specimen and spring-mass network simulator"};
    app.require_subcommand(1);
    CliOptions o;

    auto common = [&o](CLI::App* sub, bool config_required, bool run_flags) {
        auto* c = sub->add_option("--config", o.config, "Run configuration (JSON)");
        if (config_required) c->required();
        sub->add_option("--out", o.out, "Output CSV path (overrides output.path)");
        if (run_flags) {
            sub->add_option("--dt", o.dt, "Time step override");
            sub->add_option("--duration", o.duration, "Duration override");
        }
        sub->add_option("--seed", o.seed, "Seed for protocol noise");
        sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv"}));
    };

    auto* tensile = app.add_subcommand("tensile", "Constant-rate tensile test");
    auto* creep = app.add_subcommand("creep", "Creep under constant nominal stress");
    auto* relax = app.add_subcommand("relax", "Stress relaxation after a stretch step");
    auto* cyclic = app.add_subcommand("cyclic", "Sinusoidal cycling with hysteresis");
    auto* sweep = app.add_subcommand("sweep", "Hysteresis ratio over a log-spaced frequency sweep");
    auto* simulate = app.add_subcommand("simulate", "Spring-mass network simulation");
    auto* fit = app.add_subcommand("fit", "Fit an exponential law or a relaxation spectrum to data");
    auto* kernels = app.add_subcommand("kernels", "Tabulate a relaxation kernel");
    auto* validate = app.add_subcommand("validate", "Check a configuration and print its effective form");

    for (auto* s : {tensile, creep, relax, cyclic, simulate}) common(s, true, true);
    common(sweep, true, true);
    common(validate, true, false);
    common(fit, false, false);
    fit->add_option("--data", o.data, "Input CSV")->required();
    fit->add_option("--target", o.target, "law or spectrum")->check(CLI::IsMember({"law", "spectrum"}));
    fit->add_option("--terms", o.terms, "Number of log-spaced spectrum terms");
    fit->add_option("--frequencies", o.frequencies, "Explicit spectrum frequencies")->delimiter(',');
    fit->add_option("--params", o.params, "Write fitted parameters as JSON");
    common(kernels, false, false);
    kernels->add_option("--kernel", o.kernel, "Kernel spec, e.g. kelvin:E_R=1,tau_eps=1,tau_sigma=2");
    kernels->add_option("--tmin", o.tmin, "First tabulated time");
    kernels->add_option("--tmax", o.tmax, "Last tabulated time");
    kernels->add_option("--per-decade", o.per_decade, "Points per decade");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        if (*tensile) return detail::run_protocol(o, ProtocolKind::tensile, err);
        if (*creep) return detail::run_protocol(o, ProtocolKind::creep, err);
        if (*relax) return detail::run_protocol(o, ProtocolKind::relaxation, err);
        if (*cyclic) return detail::run_protocol(o, ProtocolKind::cyclic, err);
        if (*sweep) return detail::run_sweep_command(o, err);
        if (*simulate) return detail::run_simulate(o, err);
        if (*fit) return detail::run_fit(o, err);
        if (*kernels) return detail::run_kernels(o);
        if (*validate) return detail::run_validate(o, out);
    } catch (const ValidationError& e) {
        err << "invalid configuration:\n" << e.what() << '\n';
        return 2;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace qlv::io
