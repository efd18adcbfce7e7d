#include "report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace capcon::cli {

std::size_t Table::column(const std::string& name) const
{
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name)
            return i;
    return columns.size();
}

std::string format_cell(const Cell& c)
{
    if (const auto* s = std::get_if<std::string>(&c))
        return *s;
    if (const auto* i = std::get_if<long long>(&c))
        return std::to_string(*i);
    const double v = std::get<double>(c);
    if (std::isnan(v))
        return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void write_csv(std::ostream& os, const Table& t)
{
    if (!t.title.empty())
        os << "# " << t.title << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        os << (i ? "," : "") << t.columns[i];
    os << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << (i ? "," : "") << format_cell(row[i]);
        os << "\n";
    }
    for (const auto& n : t.notes)
        os << "# " << n << "\n";
}

void write_json(std::ostream& os, const std::vector<Metric>& metrics)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : metrics)
        arr.push_back({{"experiment", m.experiment},
                       {"geometry", m.geometry},
                       {"n", m.n},
                       {"n_Q", m.n_Q},
                       {"eps", m.eps},
                       {"metric", m.metric},
                       {"value", m.value}});
    os << arr.dump(2) << "\n";
}

namespace {

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(item);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

bool parse_number(const std::string& s, double& v)
{
    if (s.empty())
        return false;
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    return end && *end == '\0';
}

// Normalized key text so "1e-3" and "0.001" match.
std::string key_text(const std::string& s)
{
    double v;
    if (parse_number(s, v)) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return buf;
    }
    return s;
}

} // namespace

CompareResult compare_csv(const Table& t, std::istream& reference, double rtol)
{
    CompareResult res;
    std::string line;
    std::vector<std::string> header;
    while (std::getline(reference, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        header = split(line);
        break;
    }
    if (header.empty())
        throw std::runtime_error("reference CSV has no header");

    std::vector<std::size_t> ref_key_cols, tab_key_cols;
    for (const auto& k : t.keys) {
        std::size_t rc = header.size();
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == k)
                rc = i;
        if (rc == header.size())
            throw std::runtime_error("reference CSV lacks key column '" + k + "'");
        ref_key_cols.push_back(rc);
        tab_key_cols.push_back(t.column(k));
    }

    std::map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::string key;
        for (std::size_t c : tab_key_cols)
            key += key_text(format_cell(t.rows[r][c])) + "|";
        index[key] = r;
    }

    while (std::getline(reference, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        const auto fields = split(line);
        std::string key;
        for (std::size_t c : ref_key_cols)
            key += key_text(c < fields.size() ? fields[c] : "") + "|";
        const auto it = index.find(key);
        if (it == index.end()) {
            ++res.missing;
            continue;
        }
        const auto& row = t.rows[it->second];
        for (std::size_t i = 0; i < header.size() && i < fields.size(); ++i) {
            if (std::find(t.keys.begin(), t.keys.end(), header[i]) != t.keys.end())
                continue;
            const std::size_t tc = t.column(header[i]);
            double ref, val;
            if (tc == t.columns.size() || !parse_number(fields[i], ref))
                continue;
            if (!parse_number(format_cell(row[tc]), val)) {
                res.violations.push_back(header[i] + " missing for key " + key);
                continue;
            }
            ++res.checked;
            const double scale = std::max(std::abs(ref), 1e-300);
            if (std::abs(val - ref) > rtol * scale) {
                std::ostringstream msg;
                msg << header[i] << " at " << key << ": computed " << format_cell(val) << ", reference "
                    << fields[i];
                res.violations.push_back(msg.str());
            }
        }
    }
    return res;
}

} // namespace capcon::cli
