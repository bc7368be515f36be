#pragma once

// CSV series files: comma separated, '.' decimal point, LF newlines, one
// mandatory header row, first column time (or another strictly increasing
// abscissa).

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "qlv/error.hpp"
#include "qlv/hereditary.hpp"
#include "qlv/series.hpp"

namespace qlv::io {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kDefaultPrecision = 17;

/// Locale-independent number formatting. precision 17 gives the shortest
/// representation that round-trips; lower values round to that many
/// significant digits.
inline std::string format_number(double v, int precision = kDefaultPrecision) {
    if (!std::isfinite(v)) throw DomainError("refusing to write a non-finite value");
    if (precision < 1 || precision > 17) throw DomainError("precision must be in [1, 17]");
    char buf[64];
    std::to_chars_result r = precision >= 17 ? std::to_chars(buf, buf + sizeof buf, v)
                                             : std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, precision);
    if (r.ec != std::errc{}) throw DomainError("number formatting failed");
    return std::string(buf, r.ptr);
}

inline std::string format_series(const Series& s, int precision = kDefaultPrecision) {
    std::string out;
    for (std::size_t c = 0; c < s.names.size(); ++c) {
        if (c) out += ',';
        out += s.names[c];
    }
    out += '\n';
    for (std::size_t r = 0; r < s.rows(); ++r) {
        for (std::size_t c = 0; c < s.columns.size(); ++c) {
            if (c) out += ',';
            out += format_number(s.columns[c][r], precision);
        }
        out += '\n';
    }
    return out;
}

inline void write_text(const std::string& text, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    f.close();
    if (!f) throw IoError("write to '" + path + "' failed");
}

inline void write_series(const Series& s, const std::string& path, int precision = kDefaultPrecision) {
    write_text(format_series(s, precision), path);
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view cell, double& out) {
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    if (cell.empty()) return false;
    const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return r.ec == std::errc{} && r.ptr == cell.data() + cell.size() && std::isfinite(out);
}

}  // namespace detail

/// Parses CSV text; the first column must be strictly increasing.
inline Series parse_series(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    Series s;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view view = detail::trim(line);
        if (view.empty()) continue;
        const auto cells = detail::split(view);
        if (!header) {
            double probe;
            if (detail::parse_double(cells.front(), probe)) throw ParseError("missing header row", lineno);
            for (auto c : cells) {
                const auto name = detail::trim(c);
                if (name.empty()) throw ParseError("empty column name in header", lineno);
                s.names.emplace_back(name);
                s.columns.emplace_back();
            }
            header = true;
            continue;
        }
        if (cells.size() != s.names.size()) {
            throw ParseError("expected " + std::to_string(s.names.size()) + " cells, found " +
                                 std::to_string(cells.size()),
                             lineno);
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v;
            if (!detail::parse_double(cells[c], v)) {
                throw ParseError("non-numeric cell '" + std::string(detail::trim(cells[c])) + "' in column '" +
                                     s.names[c] + "'",
                                 lineno);
            }
            s.columns[c].push_back(v);
        }
        const auto& t = s.columns.front();
        if (t.size() > 1 && !(t.back() > t[t.size() - 2])) {
            throw ParseError(std::string(t.back() == t[t.size() - 2] ? "duplicated" : "decreasing") + " value " +
                                 qlv::detail::fmt_num(t.back()) + " in column '" + s.names.front() + "'",
                             lineno);
        }
    }
    if (s.rows() == 0) throw ParseError("no data rows");
    return s;
}

inline Series read_series(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << f.rdbuf();
    try {
        return parse_series(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

/// Strain history from a table with a time column and one of the columns
/// stretch, green_strain or strain (engineering).
inline StrainHistory to_strain_history(const Series& s) {
    if (s.names.empty() || s.names.front() != "time") throw ParseError("first column must be 'time'");
    StrainHistory h;
    h.times = s.columns.front();
    if (s.has("stretch")) {
        h.values = s.column("stretch");
        h.measure = HistoryMeasure::stretch;
    } else if (s.has("green_strain")) {
        h.values = s.column("green_strain");
        h.measure = HistoryMeasure::green;
    } else if (s.has("strain")) {
        h.values = s.column("strain");
        h.measure = HistoryMeasure::engineering;
    } else {
        throw ParseError("no stretch, green_strain or strain column");
    }
    h.validate();
    return h;
}

}  // namespace qlv::io
