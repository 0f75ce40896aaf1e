#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "tlcause/csv.hpp"
#include "tlcause/engine.hpp"
#include "tlcause/error.hpp"
#include "tlcause/granger.hpp"
#include "tlcause/market_sim.hpp"

namespace tlcause {

enum class Sign { Plus, Minus, Any };

inline char sign_char(Sign s) { return s == Sign::Plus ? '+' : s == Sign::Minus ? '-' : '*'; }

inline Sign parse_sign(std::string_view s) {
    if (s == "+" || s == "1" || s == "+1") return Sign::Plus;
    if (s == "-" || s == "-1") return Sign::Minus;
    if (s == "*" || s == "any" || s.empty()) return Sign::Any;
    throw DataError("invalid sign '" + std::string(s) + "' (expected +, - or *)");
}

/// Directed relation between two variables at lag difference delta.
struct Relation {
    std::string source;
    std::string target;
    std::size_t delta = 1;
    Sign sign = Sign::Any;
};

using RelationKey = std::tuple<std::string, std::string, std::size_t>;

/// Relations keyed by (source, target, delta). Inserting the same key with a
/// different sign widens the sign to Any.
class RelationSet {
public:
    RelationSet() = default;
    RelationSet(std::initializer_list<Relation> relations) {
        for (const auto& r : relations) insert(r);
    }

    void insert(const Relation& r) {
        if (r.delta < 1) throw DataError("relation delta must be >= 1");
        if (r.source == r.target) throw DataError("self-relation " + r.source + " -> " + r.target);
        auto [it, inserted] = items_.emplace(RelationKey{r.source, r.target, r.delta}, r.sign);
        if (!inserted && it->second != r.sign) it->second = Sign::Any;
    }

    [[nodiscard]] bool contains(const RelationKey& key) const { return items_.count(key) > 0; }
    [[nodiscard]] std::optional<Sign> sign_of(const RelationKey& key) const {
        auto it = items_.find(key);
        if (it == items_.end()) return std::nullopt;
        return it->second;
    }
    [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }
    [[nodiscard]] bool empty() const noexcept { return items_.empty(); }

    [[nodiscard]] std::vector<Relation> relations() const {
        std::vector<Relation> out;
        for (const auto& [k, s] : items_) out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), s});
        return out;
    }

    [[nodiscard]] const std::map<RelationKey, Sign>& items() const noexcept { return items_; }

    friend bool operator==(const RelationSet&, const RelationSet&) = default;

private:
    std::map<RelationKey, Sign> items_;
};

inline RelationSet truth_set(const GroundTruth& truth) {
    RelationSet out;
    for (const auto& r : truth.relations) {
        out.insert({r.source, r.target, r.delta, r.sign < 0 ? Sign::Minus : Sign::Plus});
    }
    return out;
}

struct Metrics {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tp_signed = 0;  // true positives whose sign also agrees
    double fdr = 0.0;
    double fnr = 0.0;
    std::optional<double> intersection;

    void finalize() {
        fdr = tp + fp == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(fp + tp);
        fnr = tp + fn == 0 ? 0.0 : static_cast<double>(fn) / static_cast<double>(fn + tp);
    }

    Metrics& operator+=(const Metrics& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tp_signed += o.tp_signed;
        finalize();
        return *this;
    }
};

/// A found relation is a true positive when (source, target, delta) is in
/// the truth; signs only feed tp_signed.
inline Metrics score(const RelationSet& found, const RelationSet& truth) {
    Metrics m;
    for (const auto& [key, sign] : found.items()) {
        if (auto t = truth.sign_of(key)) {
            ++m.tp;
            if (sign == Sign::Any || *t == Sign::Any || sign == *t) ++m.tp_signed;
        } else {
            ++m.fp;
        }
    }
    m.fn = truth.size() - m.tp;
    m.finalize();
    return m;
}

inline Metrics score(const RelationSet& found, const GroundTruth& truth) { return score(found, truth_set(truth)); }

inline std::size_t common_count(const RelationSet& a, const RelationSet& b) {
    std::size_t n = 0;
    for (const auto& [key, s] : a.items()) n += b.contains(key) ? 1 : 0;
    return n;
}

/// |a and b| / |a or b| over relation keys; 1 when both are empty.
inline double intersection(const RelationSet& a, const RelationSet& b) {
    const std::size_t common = common_count(a, b);
    const std::size_t joint = a.size() + b.size() - common;
    return joint == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(joint);
}

/// |a and b| / |a|, or 1 when a is empty.
inline double overlap_fraction(const RelationSet& a, const RelationSet& b) {
    return a.empty() ? 1.0 : static_cast<double>(common_count(a, b)) / static_cast<double>(a.size());
}

/// Relations of `a` also present in `b`.
inline RelationSet consensus(const RelationSet& a, const RelationSet& b) {
    RelationSet out;
    for (const auto& r : a.relations()) {
        if (b.contains({r.source, r.target, r.delta})) out.insert(r);
    }
    return out;
}

namespace detail {

// Splits "S.up" / "S.down" into (S, +1 / -1); any other atom is (atom, +1).
inline std::pair<std::string, int> atom_variable(const Formula& f) {
    const auto* a = f.as<Atom>();
    if (!a) throw DataError("relation needs atomic cause and effect, got " + print(f));
    const std::string& name = a->name;
    for (const auto& [suffix, dir] : {std::pair<std::string, int>{".up", 1}, {".down", -1}}) {
        if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            return {name.substr(0, name.size() - suffix.size()), dir};
        }
    }
    return {name, 1};
}

}  // namespace detail

/// Variable-level relation of an atomic hypothesis. The sign combines the
/// directions of both atoms with the sign of the score, so S.up raising
/// T.down reads as a negative association. delta is the window start.
inline Relation relation_from_hypothesis(const Hypothesis& h, double score) {
    const auto [src, cdir] = detail::atom_variable(h.cause);
    const auto [dst, edir] = detail::atom_variable(h.effect);
    const int s = cdir * edir * (score < 0.0 ? -1 : 1);
    return {src, dst, h.window.lo, score == 0.0 ? Sign::Any : (s > 0 ? Sign::Plus : Sign::Minus)};
}

inline RelationSet relations_from_granger(const std::vector<GrangerResult>& results,
                                          const std::vector<bool>& significant) {
    if (results.size() != significant.size()) throw DataError("relations_from_granger: length mismatch");
    RelationSet out;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (significant[i]) out.insert({results[i].source, results[i].target, results[i].lag, Sign::Any});
    }
    return out;
}

inline void write_relations_csv(std::ostream& out, const RelationSet& set) {
    out << "source,target,delta,sign\n";
    for (const auto& r : set.relations()) {
        out << r.source << ',' << r.target << ',' << r.delta << ',' << sign_char(r.sign) << '\n';
    }
}

namespace detail {

inline std::size_t column_index(const csv::Table& t, const std::string& name, const std::string& source) {
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] == name) return i;
    }
    throw DataError(source + ": missing column '" + name + "'");
}

inline std::size_t parse_count(const std::string& s, const std::string& where) {
    const auto v = csv::to_double(s);
    if (!v || *v < 1.0 || *v != std::floor(*v)) throw DataError(where + ": invalid delta '" + s + "'");
    return static_cast<std::size_t>(*v);
}

}  // namespace detail

/// Reads source,target,delta[,sign] rows; ground-truth files with extra
/// columns such as kind are accepted.
inline RelationSet read_relations_text(std::string_view text, const std::string& source = "<relations>") {
    const auto table = csv::parse(text);
    const auto is = detail::column_index(table, "source", source);
    const auto it = detail::column_index(table, "target", source);
    const auto id = detail::column_index(table, "delta", source);
    std::optional<std::size_t> isign;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (table.header[i] == "sign") isign = i;
    }
    RelationSet out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = source + " line " + std::to_string(table.line_numbers[r]);
        if (row.size() != table.header.size()) throw DataError(where + ": wrong number of fields");
        out.insert({row[is], row[it], detail::parse_count(row[id], where),
                    isign ? parse_sign(row[*isign]) : Sign::Any});
    }
    return out;
}

inline RelationSet read_relations(const std::string& path) { return read_relations_text(csv::read_file(path), path); }

inline void write_ground_truth_csv(std::ostream& out, const GroundTruth& truth) {
    out << "source,target,delta,kind,sign\n";
    for (const auto& r : truth.relations) {
        out << r.source << ',' << r.target << ',' << r.delta << ',' << kind_name(r.kind) << ','
            << (r.sign < 0 ? '-' : '+') << '\n';
    }
}

inline void write_alternates_csv(std::ostream& out, const GroundTruth& truth) {
    out << "source,target,delta,kind,sign\n";
    for (const auto& r : truth.alternates) {
        out << r.source << ',' << r.target << ',' << r.delta << ',' << kind_name(r.kind) << ','
            << (r.sign < 0 ? '-' : '+') << '\n';
    }
}

/// One row of a method comparison table.
struct MetricsRow {
    std::string method;
    std::string scenario;
    std::string period;  // "1", "2", or "all" for pooled rows
    Metrics metrics;
};

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << "method,scenario,period,tp,fp,fn,fdr,fnr,intersection,tp_signed\n";
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        out << r.method << ',' << r.scenario << ',' << r.period << ',' << m.tp << ',' << m.fp << ',' << m.fn
            << ',' << csv::format(m.fdr) << ',' << csv::format(m.fnr) << ',' << csv::format(m.intersection)
            << ',' << m.tp_signed << '\n';
    }
}

}  // namespace tlcause
