#ifndef GRUV_IO_HPP
#define GRUV_IO_HPP

#include "core.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

/**
 * @file io.hpp
 *
 * @brief Delimited text tables: a header row of column ids and a first column of row ids.
 *
 * The delimiter is a tab when the header line contains one and a comma otherwise.
 * Numbers are written in the shortest form that parses back to the same double.
 */

namespace gruv {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '"')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '"' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    if (s.empty() || s == "NA" || s == "NaN" || s == "nan") {
        throw Error("missing value at " + where);
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw Error("cannot parse number '" + std::string(s) + "' at " + where);
    }
    return v;
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
            s = s.substr(1, s.size() - 2);
        }
    }
    return out;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open '" + path + "'");
    }
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write '" + path + "'");
    }
    return out;
}

}

/**
 * @brief Numeric table with row and column labels.
 */
struct Table {
    std::string corner;
    std::vector<std::string> column_ids;
    std::vector<std::string> row_ids;
    Matrix values;
};

inline Table read_table(std::istream& in, const std::string& name = "input") {
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(name + ": empty file");
    }
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
    }
    const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
    auto header = detail::split(line, delim);
    if (header.size() < 2) {
        throw Error(name + ": header needs a row-id column and at least one data column");
    }
    Table t;
    t.corner = header.front();
    t.column_ids.assign(header.begin() + 1, header.end());

    std::vector<double> data;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") {
            continue;
        }
        auto cells = detail::split(line, delim);
        if (cells.size() != header.size()) {
            throw Error(name + " line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                        " fields, found " + std::to_string(cells.size()));
        }
        t.row_ids.push_back(cells.front());
        for (std::size_t c = 1; c < cells.size(); ++c) {
            data.push_back(parse_double(cells[c], name + " line " + std::to_string(lineno) + " column " + std::to_string(c + 1)));
        }
    }
    const auto nrow = static_cast<Index>(t.row_ids.size()), ncol = static_cast<Index>(t.column_ids.size());
    t.values.resize(nrow, ncol);
    for (Index i = 0; i < nrow; ++i) {
        for (Index j = 0; j < ncol; ++j) {
            t.values(i, j) = data[static_cast<std::size_t>(i * ncol + j)];
        }
    }
    return t;
}

inline Table read_table(const std::string& path) {
    auto in = detail::open_input(path);
    return read_table(in, path);
}

inline void write_table(std::ostream& out, const Matrix& values, const std::vector<std::string>& row_ids,
                        const std::vector<std::string>& column_ids, const std::string& corner = "id") {
    out << corner;
    for (const auto& c : column_ids) {
        out << '\t' << c;
    }
    out << '\n';
    for (Index i = 0; i < values.rows(); ++i) {
        out << row_ids[static_cast<std::size_t>(i)];
        for (Index j = 0; j < values.cols(); ++j) {
            out << '\t' << format_double(values(i, j));
        }
        out << '\n';
    }
}

inline void write_table(const std::string& path, const Matrix& values, const std::vector<std::string>& row_ids,
                        const std::vector<std::string>& column_ids, const std::string& corner = "id") {
    auto out = detail::open_output(path);
    write_table(out, values, row_ids, column_ids, corner);
}

/**
 * Samples-by-genes expression file.
 */
inline ExpressionMatrix read_expression(const std::string& path) {
    auto t = read_table(path);
    return ExpressionMatrix(std::move(t.values), std::move(t.column_ids), std::move(t.row_ids));
}

inline void write_expression(const std::string& path, const ExpressionMatrix& y) {
    write_table(path, y.values(), y.sample_ids(), y.gene_ids(), "sample_id");
}

/**
 * Per-sample values (first data column, or `column` when given), reordered to match `sample_ids`.
 */
inline Matrix read_sample_table(const std::string& path, const std::vector<std::string>& sample_ids) {
    const auto t = read_table(path);
    std::unordered_map<std::string, Index> rows;
    for (std::size_t i = 0; i < t.row_ids.size(); ++i) {
        rows.emplace(t.row_ids[i], static_cast<Index>(i));
    }
    Matrix out(static_cast<Index>(sample_ids.size()), t.values.cols());
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
        const auto it = rows.find(sample_ids[i]);
        if (it == rows.end()) {
            throw Error(path + ": no row for sample '" + sample_ids[i] + "'");
        }
        out.row(static_cast<Index>(i)) = t.values.row(it->second);
    }
    return out;
}

inline Vector read_covariate(const std::string& path, const std::vector<std::string>& sample_ids) {
    const Matrix m = read_sample_table(path, sample_ids);
    if (m.cols() != 1) {
        throw Error(path + ": covariate file must have exactly one value column");
    }
    return m.col(0);
}

/**
 * One identifier per line; blank lines and lines starting with `#` are skipped.
 */
inline std::vector<std::string> read_id_list(const std::string& path) {
    auto in = detail::open_input(path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
            line.pop_back();
        }
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos || line[b] == '#') {
            continue;
        }
        out.push_back(line.substr(b));
    }
    return out;
}

inline std::vector<Index> ids_to_indices(const std::vector<std::string>& ids, const std::vector<std::string>& universe) {
    std::unordered_map<std::string, Index> pos;
    for (std::size_t j = 0; j < universe.size(); ++j) {
        pos.emplace(universe[j], static_cast<Index>(j));
    }
    std::vector<Index> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const auto it = pos.find(id);
        if (it == pos.end()) {
            throw Error("unknown gene id '" + id + "'");
        }
        out.push_back(it->second);
    }
    return out;
}

/**
 * 1-based comma-separated indices and inclusive ranges, e.g. `801-1000,5`, returned 0-based.
 */
inline std::vector<Index> parse_index_list(const std::string& spec) {
    std::vector<Index> out;
    std::stringstream ss(spec);
    std::string part;
    const auto to_index = [&](const std::string& s) {
        Index v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 1) {
            throw Error("bad index '" + s + "' in list '" + spec + "'");
        }
        return v - 1;
    };
    while (std::getline(ss, part, ',')) {
        if (part.empty()) {
            continue;
        }
        const auto dash = part.find('-');
        if (dash == std::string::npos) {
            out.push_back(to_index(part));
            continue;
        }
        const Index lo = to_index(part.substr(0, dash)), hi = to_index(part.substr(dash + 1));
        if (hi < lo) {
            throw Error("empty range '" + part + "'");
        }
        for (Index i = lo; i <= hi; ++i) {
            out.push_back(i);
        }
    }
    return out;
}

}

#endif
