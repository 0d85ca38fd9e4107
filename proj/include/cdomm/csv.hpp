#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cdomm/errors.hpp"

namespace cdomm::csv {

struct Table {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<int> line_of_row;
};

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_number(const std::string& cell, const std::string& where) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto res = std::from_chars(first, last, v);
    if (cell.empty() || res.ec != std::errc() || res.ptr != last)
        throw DataError(where + ": cannot parse number '" + cell + "'");
    if (!std::isfinite(v)) throw DataError(where + ": non-finite value '" + cell + "'");
    return v;
}

// Reads a comma separated file whose first non-comment line is a header that must
// match `expected` exactly. Blank lines and lines starting with '#' are skipped.
// Every cell must be a finite number; negative values are rejected when
// `allow_negative` is false.
inline Table parse(std::istream& in, const std::string& source, const std::vector<std::string>& expected,
                   bool allow_negative = false) {
    Table t;
    t.source = source;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        auto cells = split(s);
        if (!have_header) {
            t.header = cells;
            if (t.header != expected) {
                std::string want;
                for (std::size_t i = 0; i < expected.size(); ++i) want += (i ? "," : "") + expected[i];
                throw DataError(source + ":" + std::to_string(lineno) + ": expected header '" + want + "'");
            }
            have_header = true;
            continue;
        }
        if (cells.size() != expected.size())
            throw DataError(source + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(expected.size()) + " columns, got " + std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            std::string where = source + ":" + std::to_string(lineno) + ":" + std::to_string(c + 1);
            double v = parse_number(cells[c], where);
            if (!allow_negative && v < 0.0) throw DataError(where + ": negative value '" + cells[c] + "'");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
        t.line_of_row.push_back(lineno);
    }
    if (!have_header) throw DataError(source + ": empty file");
    return t;
}

inline Table read(const std::string& path, const std::vector<std::string>& expected, bool allow_negative = false) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return parse(in, path, expected, allow_negative);
}

// Shortest round-trip formatting so repeated runs produce identical bytes.
inline std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace cdomm::csv
