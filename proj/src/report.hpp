#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace capcon::cli {

using Cell = std::variant<std::string, long long, double>;

/// One CSV table: a title comment, a fixed header and rows.
struct Table {
    std::string title;
    std::vector<std::string> columns;
    /// Columns that identify a row when comparing against a reference.
    std::vector<std::string> keys;
    std::vector<std::vector<Cell>> rows;
    /// Trailing "# key=value" lines.
    std::vector<std::string> notes;

    void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
    std::size_t column(const std::string& name) const;
};

/// Formats a value with six significant digits.
std::string format_cell(const Cell& c);

void write_csv(std::ostream& os, const Table& t);

/// One record of the JSON report.
struct Metric {
    std::string experiment;
    std::string geometry;
    long long n = 0;
    long long n_Q = 0;
    double eps = 0.0;
    std::string metric;
    double value = 0.0;
};

void write_json(std::ostream& os, const std::vector<Metric>& metrics);

struct CompareResult {
    std::size_t checked = 0;
    /// Reference rows with no computed counterpart; skipped.
    std::size_t missing = 0;
    std::vector<std::string> violations;
    bool ok() const { return violations.empty() && checked > 0; }
};

/// Checks every numeric column of `reference` that also appears in `t`, matching rows
/// on the key columns, against a relative tolerance.
CompareResult compare_csv(const Table& t, std::istream& reference, double rtol);

} // namespace capcon::cli
