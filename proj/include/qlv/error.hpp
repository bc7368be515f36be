#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace qlv {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Stiffness matrix failing the leading-principal-minor test.
class StabilityError : public std::runtime_error {
public:
    StabilityError(const std::string& what, std::size_t failing_minor)
        : std::runtime_error(what), failing_minor_(failing_minor) {}

    // 1-based index of the first non-positive leading principal minor.
    std::size_t failing_minor() const noexcept { return failing_minor_; }

private:
    std::size_t failing_minor_;
};

// Invalid simulation setup (e.g. a time step beyond the explicit stability bound).
class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Root finding or iteration failure.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text (CSV, config). Carries the 1-based line when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

namespace detail {

inline std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail
}  // namespace qlv
