#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "qlv/io/config.hpp"
#include "qlv/io/csv.hpp"

using namespace qlv;
using namespace qlv::io;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    fs::path dir = fs::temp_directory_path() / "qlv_test_io" / (std::string(info->test_suite_name()) + "." + info->name());
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream b;
    b << f.rdbuf();
    return b.str();
}

Series sample_series() {
    Series s;
    s.add("time", {0.0, 0.1, 0.2, 0.30000000000000004});
    s.add("stretch", {1.0, 1.0123456789012345, 1.1, 1.0 / 3.0});
    s.add("stress", {0.0, -2.5e-17, 123456.789, 6.02214076e23});
    return s;
}

std::vector<std::string> validation_errors(const json& j) {
    try {
        (void)parse_config(j);
    } catch (const ValidationError& e) {
        return e.errors();
    }
    return {};
}

bool mentions(const std::vector<std::string>& errors, const std::string& needle) {
    return std::any_of(errors.begin(), errors.end(), [&](const std::string& e) { return e.find(needle) != std::string::npos; });
}

json minimal_model() {
    return json::parse(R"({
        "model": { "elastic": { "kind": "exponential", "B": 1, "C": 1 },
                   "kernel": { "kind": "fung", "c": 0.5, "q1": 0.1, "q2": 10 } },
        "protocol": { "kind": "relaxation", "duration": 1, "dt": 0.1 }
    })");
}

json minimal_network() {
    return json::parse(R"({
        "network": { "masses": [1, 1], "stiffness": [[2, -1], [-1, 2]], "duration": 1, "dt": 0.01 }
    })");
}

}  // namespace

TEST(Csv, FormatIsShortestRoundTrip) {
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(1.0), "1");
    EXPECT_EQ(format_number(-2.5e-17), "-2.5e-17");
    EXPECT_EQ(format_number(1.0 / 3.0, 6), "0.333333");
    EXPECT_EQ(format_number(123456.789, 6), "123457");
    EXPECT_THROW(format_number(std::nan("")), DomainError);
}

TEST(Csv, WriteReadRoundTrip) {
    const auto s = sample_series();
    const auto path = scratch("a.csv").string();
    write_series(s, path);
    const auto back = read_series(path);
    EXPECT_EQ(back.names, s.names);
    for (std::size_t c = 0; c < s.columns.size(); ++c) EXPECT_EQ(back.columns[c], s.columns[c]);
}

TEST(Csv, TwoWritesAreByteIdenticalWithLfNewlines) {
    const auto s = sample_series();
    const auto a = scratch("a.csv"), b = scratch("b.csv");
    write_series(s, a.string());
    write_series(s, b.string());
    const auto ta = slurp(a);
    EXPECT_EQ(ta, slurp(b));
    EXPECT_EQ(ta.find('\r'), std::string::npos);
    EXPECT_EQ(ta.substr(0, ta.find('\n')), "time,stretch,stress");
}

TEST(Csv, PrecisionSixTruncates) {
    const auto path = scratch("p6.csv");
    write_series(sample_series(), path.string(), 6);
    const auto text = slurp(path);
    EXPECT_NE(text.find("1.01235"), std::string::npos);
    EXPECT_NE(text.find("0.333333"), std::string::npos);
    EXPECT_NE(text.find("6.02214e+23"), std::string::npos);
    const auto back = read_series(path.string());
    EXPECT_NEAR(back.column("stretch")[1], 1.0123456789012345, 5e-6);
}

TEST(Csv, WellFormedThreeRows) {
    const auto s = io::parse_series("time,strain\n0,0\n0.5,0.01\r\n1,0.02\n\n");
    EXPECT_EQ(s.rows(), 3u);
    const auto h = to_strain_history(s);
    EXPECT_EQ(h.measure, HistoryMeasure::engineering);
    EXPECT_EQ(h.values[2], 0.02);
}

TEST(Csv, ParseErrorsCarryLineNumbers) {
    auto line_of = [](const std::string& text) {
        try {
            (void)io::parse_series(text);
        } catch (const ParseError& e) {
            return std::make_pair(e.line(), std::string(e.what()));
        }
        return std::make_pair(std::size_t{0}, std::string("no error"));
    };
    auto [l1, m1] = line_of("time,stress\n0,1\n1,2\n1,3\n");
    EXPECT_EQ(l1, 4u);
    EXPECT_NE(m1.find("duplicated"), std::string::npos);
    auto [l2, m2] = line_of("time,stress\n0,1\n1,abc\n");
    EXPECT_EQ(l2, 3u);
    EXPECT_NE(m2.find("non-numeric"), std::string::npos);
    auto [l3, m3] = line_of("0,1\n1,2\n");
    EXPECT_EQ(l3, 1u);
    EXPECT_NE(m3.find("missing header"), std::string::npos);
    auto [l4, m4] = line_of("time,stress\n0,1\n2,2\n1,3\n");
    EXPECT_EQ(l4, 4u);
    EXPECT_NE(m4.find("decreasing"), std::string::npos);
    auto [l5, m5] = line_of("time,stress\n0,1,2\n");
    EXPECT_EQ(l5, 2u);
    auto [l6, m6] = line_of("");
    EXPECT_EQ(m6, "no data rows");
    auto [l7, m7] = line_of("time,stress\n");
    EXPECT_EQ(m7, "no data rows");
}

TEST(Csv, IoFailuresNameThePath) {
    try {
        (void)read_series("/nonexistent/dir/x.csv");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/x.csv"), std::string::npos);
    }
    EXPECT_THROW(write_series(sample_series(), "/nonexistent/dir/x.csv"), IoError);
    const auto empty = scratch("empty.csv");
    write_text("", empty.string());
    try {
        (void)read_series(empty.string());
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("no data rows"), std::string::npos);
    }
}

TEST(Config, MinimalConfigFillsDefaultsAndEchoIsIdempotent) {
    const auto cfg = parse_config(minimal_model());
    ASSERT_TRUE(cfg.model && cfg.protocol);
    EXPECT_EQ(cfg.model->prony_terms, 64u);
    EXPECT_EQ(cfg.output.precision, 17);
    const auto once = effective_config(cfg);
    const auto twice = effective_config(parse_config(once));
    EXPECT_EQ(once, twice);
}

TEST(Config, ExampleConfigsParseAndEchoIdempotently) {
    for (const char* name : {"exponential_relaxation.json", "fung_sweep.json", "chain3.json"}) {
        const auto cfg = load_config(std::string(QLV_CONFIG_DIR) + "/" + name);
        const auto once = effective_config(cfg);
        EXPECT_EQ(once, effective_config(parse_config(once))) << name;
    }
}

TEST(Config, FungQ1AtLeastQ2ReportsPath) {
    auto j = minimal_model();
    j["model"]["kernel"]["q1"] = 10.0;
    const auto e = validation_errors(j);
    EXPECT_TRUE(mentions(e, "model.kernel.q1")) << ::testing::PrintToString(e);
}

TEST(Config, ModelAndNetworkAreMutuallyExclusive) {
    auto j = minimal_model();
    j["network"] = minimal_network()["network"];
    EXPECT_TRUE(mentions(validation_errors(j), "mutually exclusive"));
    EXPECT_TRUE(mentions(validation_errors(json::object()), "exactly one"));
}

TEST(Config, UnknownKeysAreErrors) {
    auto j = minimal_model();
    j["model"]["kernel"]["q3"] = 1.0;
    j["protocol"]["bogus"] = true;
    j["extra"] = 1;
    const auto e = validation_errors(j);
    EXPECT_TRUE(mentions(e, "model.kernel.q3"));
    EXPECT_TRUE(mentions(e, "protocol.bogus"));
    EXPECT_TRUE(mentions(e, "extra"));
}

TEST(Config, AllErrorsAreReportedNotJustTheFirst) {
    auto j = minimal_model();
    j["model"]["elastic"]["B"] = -1.0;
    j["model"]["elastic"]["C"] = 0.0;
    j["protocol"]["dt"] = -0.1;
    EXPECT_GE(validation_errors(j).size(), 3u);
}

TEST(Config, SyntaxErrorIsAValidationError) {
    EXPECT_THROW((void)parse_config(std::string("{ \"model\": ")), ValidationError);
}

struct BadConfig {
    std::string name;
    bool network;
    json patch;
    std::string path;
};

void PrintTo(const BadConfig& c, std::ostream* os) { *os << c.name; }

class BadConfigs : public ::testing::TestWithParam<BadConfig> {};

TEST_P(BadConfigs, ReportsKeyPath) {
    const auto& c = GetParam();
    json j = c.network ? minimal_network() : minimal_model();
    j.merge_patch(c.patch);
    const auto e = validation_errors(j);
    ASSERT_FALSE(e.empty()) << c.name;
    EXPECT_TRUE(mentions(e, c.path)) << c.name << ": " << ::testing::PrintToString(e);
}

INSTANTIATE_TEST_SUITE_P(
    Invariants, BadConfigs,
    ::testing::Values(
        BadConfig{"exp_B", false, json::parse(R"({"model":{"elastic":{"B":0}}})"), "model.elastic.B"},
        BadConfig{"exp_C", false, json::parse(R"({"model":{"elastic":{"C":-1}}})"), "model.elastic.C"},
        BadConfig{"linear_k", false, json::parse(R"({"model":{"elastic":{"kind":"linear","B":null,"C":null,"k":0}}})"),
                  "model.elastic.k"},
        BadConfig{"elastic_kind", false, json::parse(R"({"model":{"elastic":{"kind":"rubber"}}})"),
                  "model.elastic.kind"},
        BadConfig{"fung_c", false,
                  json::parse(R"({"model":{"elastic":{"kind":"fung","B":null,"C":null,"c":-1}}})"), "model.elastic.c"},
        BadConfig{"fung_a4", false,
                  json::parse(R"({"model":{"elastic":{"kind":"fung","B":null,"C":null,"c":1,"a1":1,"a2":1,"a4":2}}})"),
                  "model.elastic.a4"},
        BadConfig{"maxwell_mu", false,
                  json::parse(R"({"model":{"kernel":{"kind":"maxwell","c":null,"q1":null,"q2":null,"mu":0,"eta":1}}})"),
                  "model.kernel.mu"},
        BadConfig{"voigt_eta", false,
                  json::parse(R"({"model":{"kernel":{"kind":"voigt","c":null,"q1":null,"q2":null,"mu":1,"eta":-2}}})"),
                  "model.kernel.eta"},
        BadConfig{"kelvin_order", false,
                  json::parse(R"({"model":{"kernel":{"kind":"kelvin","c":null,"q1":null,"q2":null,"E_R":1,"tau_eps":3,"tau_sigma":1}}})"),
                  "model.kernel.tau_eps"},
        BadConfig{"kelvin_ER", false,
                  json::parse(R"({"model":{"kernel":{"kind":"kelvin","c":null,"q1":null,"q2":null,"E_R":0,"tau_eps":1,"tau_sigma":2}}})"),
                  "model.kernel.E_R"},
        BadConfig{"prony_amp", false,
                  json::parse(R"({"model":{"kernel":{"kind":"prony","c":null,"q1":null,"q2":null,"terms":[{"amplitude":-1,"frequency":1}]}}})"),
                  "model.kernel.terms[0].amplitude"},
        BadConfig{"prony_freq_order", false,
                  json::parse(R"({"model":{"kernel":{"kind":"prony","c":null,"q1":null,"q2":null,"terms":[{"amplitude":1,"frequency":2},{"amplitude":1,"frequency":1}]}}})"),
                  "model.kernel.terms[1].frequency"},
        BadConfig{"prony_zero", false,
                  json::parse(R"({"model":{"kernel":{"kind":"prony","c":null,"q1":null,"q2":null,"terms":[]}}})"),
                  "model.kernel.terms"},
        BadConfig{"fung_q1", false, json::parse(R"({"model":{"kernel":{"q1":0}}})"), "model.kernel.q1"},
        BadConfig{"fung_kernel_c", false, json::parse(R"({"model":{"kernel":{"c":0}}})"), "model.kernel.c"},
        BadConfig{"prony_terms", false, json::parse(R"({"model":{"prony_terms":1}})"), "model.prony_terms"},
        BadConfig{"method", false, json::parse(R"({"model":{"method":"guess"}})"), "model.method"},
        BadConfig{"dt", false, json::parse(R"({"protocol":{"dt":0}})"), "protocol.dt"},
        BadConfig{"duration", false, json::parse(R"({"protocol":{"duration":-1}})"), "protocol.duration"},
        BadConfig{"hold_stretch", false, json::parse(R"({"protocol":{"hold_stretch":0}})"), "protocol.hold_stretch"},
        BadConfig{"stretch_rate", false, json::parse(R"({"protocol":{"kind":"tensile","stretch_rate":0}})"),
                  "protocol.stretch_rate"},
        BadConfig{"amplitude", false, json::parse(R"({"protocol":{"kind":"cyclic","amplitude":0}})"),
                  "protocol.amplitude"},
        BadConfig{"offset", false, json::parse(R"({"protocol":{"kind":"cyclic","offset":-1}})"), "protocol.offset"},
        BadConfig{"steps_per_cycle", false, json::parse(R"({"protocol":{"kind":"cyclic","steps_per_cycle":7}})"),
                  "protocol.steps_per_cycle"},
        BadConfig{"max_cycles", false, json::parse(R"({"protocol":{"kind":"cyclic","cycles":5,"max_cycles":2}})"),
                  "protocol.max_cycles"},
        BadConfig{"sweep_max", false, json::parse(R"({"protocol":{"sweep":{"min":10,"max":1}}})"),
                  "protocol.sweep.max"},
        BadConfig{"noise", false, json::parse(R"({"protocol":{"noise":-0.1}})"), "protocol.noise"},
        BadConfig{"protocol_kind", false, json::parse(R"({"protocol":{"kind":"shake"}})"), "protocol.kind"},
        BadConfig{"stride", false, json::parse(R"({"output":{"stride":0}})"), "output.stride"},
        BadConfig{"precision", false, json::parse(R"({"output":{"precision":30}})"), "output.precision"},
        BadConfig{"type", false, json::parse(R"({"protocol":{"dt":"fast"}})"), "protocol.dt"},
        BadConfig{"mass", true, json::parse(R"({"network":{"masses":[1,0]}})"), "network.masses[1]"},
        BadConfig{"stiffness_shape", true, json::parse(R"({"network":{"stiffness":[[1,0]]}})"), "network.stiffness"},
        BadConfig{"stiffness_sym", true, json::parse(R"({"network":{"stiffness":[[2,-1],[-0.5,2]]}})"),
                  "network.stiffness[0][1]"},
        BadConfig{"net_dt", true, json::parse(R"({"network":{"dt":0}})"), "network.dt"},
        BadConfig{"net_dt_stability", true, json::parse(R"({"network":{"dt":5}})"), "network.dt"},
        BadConfig{"damping_shape", true, json::parse(R"({"network":{"damping":[[1]]}})"), "network.damping"},
        BadConfig{"memory_index", true,
                  json::parse(R"({"network":{"memory_kernels":[{"i":2,"j":0,"equilibrium":0,"terms":[]}]}})"),
                  "network.memory_kernels[0].i"},
        BadConfig{"memory_equilibrium", true,
                  json::parse(R"({"network":{"memory_kernels":[{"i":0,"j":0,"equilibrium":1,"terms":[]}]}})"),
                  "network.memory_kernels[0].equilibrium"},
        BadConfig{"memory_duplicate", true,
                  json::parse(R"({"network":{"memory_kernels":[{"i":0,"j":0,"equilibrium":2},{"i":0,"j":0,"equilibrium":2}]}})"),
                  "network.memory_kernels[1]"},
        BadConfig{"force_rows", true, json::parse(R"({"network":{"forces":{"times":[0,1],"values":[[0,0]]}}})"),
                  "network.forces.values"},
        BadConfig{"force_times", true,
                  json::parse(R"({"network":{"forces":{"times":[1,0],"values":[[0,0],[0,0]]}}})"),
                  "network.forces.times[1]"},
        BadConfig{"connection_B", true,
                  json::parse(R"({"network":{"connections":[{"i":0,"B":0,"C":1}]}})"), "network.connections[0].B"},
        BadConfig{"connection_j", true,
                  json::parse(R"({"network":{"connections":[{"i":0,"j":7,"B":1,"C":1}]}})"),
                  "network.connections[0].j"},
        BadConfig{"connection_norm", true,
                  json::parse(R"({"network":{"connections":[{"i":0,"B":1,"C":1,"equilibrium":0.5}]}})"),
                  "network.connections[0].equilibrium"},
        BadConfig{"prescribed_dof", true,
                  json::parse(R"({"network":{"prescribed":[{"dof":5,"times":[0],"values":[1]}]}})"),
                  "network.prescribed[0].dof"},
        BadConfig{"initial_q", true, json::parse(R"({"network":{"initial":{"q":[1]}}})"), "network.initial.q"},
        BadConfig{"protocol_with_network", true, json::parse(R"({"protocol":{"kind":"relaxation"}})"), "protocol"}),
    [](const ::testing::TestParamInfo<BadConfig>& info) { return info.param.name; });
