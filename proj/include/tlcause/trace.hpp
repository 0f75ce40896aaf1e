#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tlcause/bit_vector.hpp"
#include "tlcause/csv.hpp"
#include "tlcause/error.hpp"

namespace tlcause {

/// One named numeric series (e.g. daily returns of a portfolio).
struct RawSeries {
    std::string name;
    std::vector<double> values;
    std::vector<std::string> timestamps;  // empty, or one label per value
};

/// Time-indexed boolean observation matrix. Each atom belongs to an
/// underlying variable; atoms derived from the same series share it.
class Trace {
public:
    Trace(std::vector<std::string> atoms, std::vector<BitVector> columns,
          std::vector<std::string> variables = {})
        : atoms_(std::move(atoms)), columns_(std::move(columns)), variables_(std::move(variables)) {
        if (atoms_.size() != columns_.size()) {
            throw DataError("trace: atom and column counts differ");
        }
        if (variables_.empty()) variables_ = atoms_;
        if (variables_.size() != atoms_.size()) {
            throw DataError("trace: atom and variable counts differ");
        }
        if (atoms_.empty()) throw DataError("trace: no atoms");
        length_ = columns_.front().size();
        if (length_ == 0) throw DataError("trace: length must be at least 1");
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            if (columns_[i].size() != length_) throw DataError("trace: ragged columns");
            if (!index_.emplace(atoms_[i], i).second) {
                throw DataError("trace: duplicate atom '" + atoms_[i] + "'");
            }
        }
    }

    [[nodiscard]] std::size_t length() const noexcept { return length_; }
    [[nodiscard]] const std::vector<std::string>& atoms() const noexcept { return atoms_; }
    [[nodiscard]] const std::string& variable_of(std::size_t atom) const { return variables_[atom]; }
    [[nodiscard]] const BitVector& column(std::size_t atom) const { return columns_[atom]; }

    [[nodiscard]] std::optional<std::size_t> index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    [[nodiscard]] bool at(std::size_t t, std::size_t atom) const { return columns_[atom].test(t); }

    [[nodiscard]] std::size_t variable_count() const {
        return std::set<std::string>(variables_.begin(), variables_.end()).size();
    }

private:
    std::vector<std::string> atoms_;
    std::vector<BitVector> columns_;
    std::vector<std::string> variables_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t length_ = 0;
};

/// Values above +threshold assert `S.up`, below -threshold assert `S.down`;
/// values in [-threshold, threshold] (including exact zeros) assert neither.
struct DiscretizationRule {
    double threshold = 0.0;
};

inline std::string up_atom(const std::string& series) { return series + ".up"; }
inline std::string down_atom(const std::string& series) { return series + ".down"; }

/// Loads a CSV with a header row. A first column whose header is `date`,
/// `time`, `timestamp`, `day` or `t` (case-insensitive) holds labels; all
/// other columns must be numeric.
inline std::vector<RawSeries> load_csv_text(std::string_view text, const std::string& source = "<csv>") {
    csv::Table table;
    try {
        table = csv::parse(text);
    } catch (const DataError& e) {
        throw DataError(source + ": " + e.what());
    }
    if (table.rows.empty()) throw DataError(source + ": no data rows");

    auto lower = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
        return s;
    };
    const std::string first = lower(table.header.front());
    const bool has_dates = first == "date" || first == "time" || first == "timestamp" ||
                           first == "day" || first == "t";
    const std::size_t first_value = has_dates ? 1 : 0;
    if (table.header.size() <= first_value) throw DataError(source + ": no value columns");

    std::vector<RawSeries> out(table.header.size() - first_value);
    for (std::size_t c = first_value; c < table.header.size(); ++c) {
        out[c - first_value].name = table.header[c];
        out[c - first_value].values.reserve(table.rows.size());
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        if (row.size() != table.header.size()) {
            throw DataError(source + ": row " + std::to_string(r + 1) + " (line " +
                            std::to_string(line) + ") has " +
                            std::to_string(row.size()) + " cells, expected " +
                            std::to_string(table.header.size()));
        }
        for (std::size_t c = first_value; c < row.size(); ++c) {
            auto v = csv::to_double(row[c]);
            if (!v || !std::isfinite(*v)) {
                throw DataError(source + ": non-numeric value '" + row[c] + "' at row " +
                                std::to_string(r + 1) + " (line " + std::to_string(line) +
                                "), column " + table.header[c]);
            }
            out[c - first_value].values.push_back(*v);
        }
        if (has_dates) {
            for (auto& s : out) s.timestamps.push_back(row.front());
        }
    }
    if (has_dates) {
        const auto& ts = out.front().timestamps;
        auto increasing = [](const std::string& a, const std::string& b) {
            const auto x = csv::to_double(a);
            const auto y = csv::to_double(b);
            return x && y ? *x < *y : a < b;
        };
        for (std::size_t i = 1; i < ts.size(); ++i) {
            if (!increasing(ts[i - 1], ts[i])) {
                throw DataError(source + ": timestamps not strictly increasing at row " +
                                std::to_string(table.line_numbers[i]));
            }
        }
    }
    return out;
}

inline std::vector<RawSeries> load_csv(const std::string& path) {
    return load_csv_text(csv::read_file(path), path);
}

inline Trace discretize(const std::vector<RawSeries>& series, const DiscretizationRule& rule = {}) {
    if (!(rule.threshold >= 0.0)) throw DataError("discretize: threshold must be >= 0");
    if (series.empty()) throw DataError("discretize: no series");
    const std::size_t n = series.front().values.size();
    std::set<std::string> seen;
    std::vector<std::string> atoms;
    std::vector<std::string> variables;
    std::vector<BitVector> columns;
    for (const auto& s : series) {
        if (s.values.size() != n) {
            throw DataError("discretize: series '" + s.name + "' has length " +
                            std::to_string(s.values.size()) + ", expected " + std::to_string(n));
        }
        if (!seen.insert(s.name).second) {
            throw DataError("discretize: duplicate series name '" + s.name + "'");
        }
        BitVector up(n), down(n);
        for (std::size_t t = 0; t < n; ++t) {
            up.set(t, s.values[t] > rule.threshold);
            down.set(t, s.values[t] < -rule.threshold);
        }
        atoms.push_back(up_atom(s.name));
        atoms.push_back(down_atom(s.name));
        variables.push_back(s.name);
        variables.push_back(s.name);
        columns.push_back(std::move(up));
        columns.push_back(std::move(down));
    }
    return Trace(std::move(atoms), std::move(columns), std::move(variables));
}

/// Rows [from, to) of a trace.
inline Trace slice(const Trace& trace, std::size_t from, std::size_t to) {
    if (!(from < to && to <= trace.length())) {
        throw DataError("slice: range [" + std::to_string(from) + "," + std::to_string(to) +
                        ") invalid for trace of length " + std::to_string(trace.length()));
    }
    std::vector<BitVector> columns;
    std::vector<std::string> variables;
    for (std::size_t a = 0; a < trace.atoms().size(); ++a) {
        BitVector col(to - from);
        for (std::size_t t = from; t < to; ++t) col.set(t - from, trace.at(t, a));
        columns.push_back(std::move(col));
        variables.push_back(trace.variable_of(a));
    }
    return Trace(trace.atoms(), std::move(columns), std::move(variables));
}

/// Rows [from, to) of every series.
inline std::vector<RawSeries> slice(const std::vector<RawSeries>& series, std::size_t from, std::size_t to) {
    std::vector<RawSeries> out;
    for (const auto& s : series) {
        if (!(from < to && to <= s.values.size())) throw DataError("slice: range out of bounds");
        RawSeries r{s.name, {s.values.begin() + from, s.values.begin() + to}, {}};
        if (!s.timestamps.empty()) r.timestamps.assign(s.timestamps.begin() + from, s.timestamps.begin() + to);
        out.push_back(std::move(r));
    }
    return out;
}

/// 0/1 matrix with one column per atom, for debugging.
inline void write_trace_csv(std::ostream& out, const Trace& trace) {
    out << "t";
    for (const auto& a : trace.atoms()) out << ',' << a;
    out << '\n';
    for (std::size_t t = 0; t < trace.length(); ++t) {
        out << t;
        for (std::size_t a = 0; a < trace.atoms().size(); ++a) out << ',' << (trace.at(t, a) ? 1 : 0);
        out << '\n';
    }
}

inline void write_series_csv(std::ostream& out, const std::vector<RawSeries>& series) {
    const bool dated = !series.empty() && !series.front().timestamps.empty();
    out << (dated ? "date" : "t");
    for (const auto& s : series) out << ',' << s.name;
    out << '\n';
    const std::size_t n = series.empty() ? 0 : series.front().values.size();
    for (std::size_t t = 0; t < n; ++t) {
        if (dated) out << series.front().timestamps[t];
        else out << t;
        for (const auto& s : series) out << ',' << csv::format(s.values[t]);
        out << '\n';
    }
}

}  // namespace tlcause
