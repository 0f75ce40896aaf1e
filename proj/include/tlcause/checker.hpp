#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include "tlcause/bit_vector.hpp"
#include "tlcause/error.hpp"
#include "tlcause/formula.hpp"
#include "tlcause/trace.hpp"

namespace tlcause {

/// Frequency estimate kept as an exact ratio of counts.
struct ProbEstimate {
    std::uint64_t numerator = 0;
    std::uint64_t denominator = 0;

    [[nodiscard]] bool defined() const noexcept { return denominator > 0; }

    [[nodiscard]] std::optional<double> value() const noexcept {
        if (!defined()) return std::nullopt;
        return static_cast<double>(numerator) / static_cast<double>(denominator);
    }

    /// Exact a < b on defined estimates (cross-multiplied counts).
    [[nodiscard]] static bool less(const ProbEstimate& a, const ProbEstimate& b) noexcept {
        return static_cast<unsigned __int128>(a.numerator) * b.denominator <
               static_cast<unsigned __int128>(b.numerator) * a.denominator;
    }

    friend bool operator==(const ProbEstimate&, const ProbEstimate&) = default;
};

/// Truth of a formula at every time point of a trace.
struct SatVector {
    Formula formula;
    BitVector truth;
};

namespace detail {

inline std::size_t window_end(std::size_t t, const WindowBound& w, std::size_t length) {
    if (!w.hi) return length - 1;
    const std::size_t hi = *w.hi;
    return hi >= length - 1 - t ? length - 1 : t + hi;
}

// until(t): exists u in [t+lo, min(t+hi, T-1)] with rhs(u) and lhs on [t, u).
inline BitVector until_bits(const BitVector& lhs, const BitVector& rhs, const WindowBound& w) {
    const std::size_t n = rhs.size();
    BitVector out(n);
    const auto prefix = rhs.prefix_counts();
    std::vector<std::size_t> next_fail(n + 1, n);
    for (std::size_t t = n; t-- > 0;) next_fail[t] = lhs.test(t) ? next_fail[t + 1] : t;
    for (std::size_t t = 0; t < n; ++t) {
        if (w.lo > n - 1 - t) continue;
        const std::size_t first = t + w.lo;
        std::size_t last = window_end(t, w, n);
        if (next_fail[t] < last) last = next_fail[t];
        if (first <= last && prefix[last + 1] > prefix[first]) out.set(t);
    }
    return out;
}

// hits(t): the effect holds somewhere in [t+lo, min(t+hi, T-1)]. False when
// the window starts past the end of the trace.
inline BitVector window_hit_bits(const BitVector& effect, const WindowBound& w) {
    const std::size_t n = effect.size();
    BitVector out(n);
    const auto prefix = effect.prefix_counts();
    for (std::size_t t = 0; t < n; ++t) {
        if (w.lo > n - 1 - t) continue;
        const std::size_t first = t + w.lo;
        const std::size_t last = window_end(t, w, n);
        if (prefix[last + 1] > prefix[first]) out.set(t);
    }
    return out;
}

}  // namespace detail

/// Time points t whose window start t + lo lies inside the trace.
inline BitVector window_valid(std::size_t length, std::size_t lo) {
    BitVector out(length);
    for (std::size_t t = 0; t + lo < length; ++t) out.set(t);
    return out;
}

inline BitVector window_hits(const BitVector& effect, const WindowBound& w) {
    return detail::window_hit_bits(effect, w);
}

/// Pointwise satisfaction of a LeadsTo-free, bound-free formula. Windows
/// running past the last time point are evaluated over the available suffix.
inline BitVector sat_bits(const Trace& trace, const Formula& f) {
    return std::visit(
        [&](const auto& n) -> BitVector {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Atom>) {
                auto idx = trace.index_of(n.name);
                if (!idx) throw DataError("unknown atom '" + n.name + "'");
                return trace.column(*idx);
            } else if constexpr (std::is_same_v<T, Not>) {
                return ~sat_bits(trace, n.operand);
            } else if constexpr (std::is_same_v<T, And>) {
                return sat_bits(trace, n.lhs) & sat_bits(trace, n.rhs);
            } else if constexpr (std::is_same_v<T, Or>) {
                return sat_bits(trace, n.lhs) | sat_bits(trace, n.rhs);
            } else if constexpr (std::is_same_v<T, Until>) {
                if (n.bound) throw DataError("probability bound inside a state formula: " + print(f));
                return detail::until_bits(sat_bits(trace, n.lhs), sat_bits(trace, n.rhs), n.window);
            } else if constexpr (std::is_same_v<T, Finally>) {
                if (n.bound) throw DataError("probability bound inside a state formula: " + print(f));
                return detail::window_hit_bits(sat_bits(trace, n.inner), n.window);
            } else {
                throw DataError("leads-to cannot be evaluated pointwise: " + print(f));
            }
        },
        f.node().value);
}

inline SatVector sat(const Trace& trace, const Formula& f) { return {f, sat_bits(trace, f)}; }

/// Fraction of time points at which f holds.
inline ProbEstimate estimate_prob(const Trace& trace, const Formula& f) {
    return {sat_bits(trace, f).count(), trace.length()};
}

/// Leads-to frequency from precomputed satisfaction vectors.
inline ProbEstimate estimate_leadsto(const BitVector& cause, const BitVector& effect, const WindowBound& w) {
    if (w.lo == 0) throw DataError("leads-to window must start at 1 or later");
    if (!w.valid()) throw DataError("leads-to window lower bound exceeds upper bound");
    const BitVector eligible = cause & window_valid(cause.size(), w.lo);
    return {BitVector::count_and(eligible, window_hits(effect, w)), eligible.count()};
}

/// Among time points where cause holds and t + lo is inside the trace, the
/// fraction at which effect holds within [t+lo, t+hi].
inline ProbEstimate estimate_leadsto(const Trace& trace, const Formula& cause, const Formula& effect,
                                     const WindowBound& w) {
    return estimate_leadsto(sat_bits(trace, cause), sat_bits(trace, effect), w);
}

/// Memoizes satisfaction vectors by canonical formula text for one trace.
/// Not synchronized; give each thread its own cache.
class SatCache {
public:
    explicit SatCache(const Trace& trace) : trace_(&trace) {}

    const BitVector& get(const Formula& f) {
        auto key = print(f);
        auto it = cache_.find(key);
        if (it == cache_.end()) it = cache_.emplace(std::move(key), sat_bits(*trace_, f)).first;
        return it->second;
    }

    [[nodiscard]] const Trace& trace() const noexcept { return *trace_; }

private:
    const Trace* trace_;
    std::unordered_map<std::string, BitVector> cache_;
};

inline void write_sat_csv(std::ostream& out, const std::vector<SatVector>& vectors) {
    out << "t";
    for (const auto& v : vectors) out << ",\"" << print(v.formula) << '"';
    out << '\n';
    const std::size_t n = vectors.empty() ? 0 : vectors.front().truth.size();
    for (std::size_t t = 0; t < n; ++t) {
        out << t;
        for (const auto& v : vectors) out << ',' << (v.truth.test(t) ? 1 : 0);
        out << '\n';
    }
}

}  // namespace tlcause
