#pragma once

#include <string>
#include <vector>

#include "qlv/error.hpp"

namespace qlv {

// Named columns of equal length; the first column is time.
struct Series {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }

    void add(std::string name, std::vector<double> values) {
        if (!columns.empty() && values.size() != rows()) {
            throw DomainError("series column '" + name + "' has " + std::to_string(values.size()) + " rows, expected " +
                              std::to_string(rows()));
        }
        names.push_back(std::move(name));
        columns.push_back(std::move(values));
    }

    const std::vector<double>& column(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return columns[i];
        }
        throw DomainError("series has no column '" + name + "'");
    }

    bool has(const std::string& name) const {
        for (const auto& n : names) {
            if (n == name) return true;
        }
        return false;
    }
};

}  // namespace qlv
