#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tlcause/bit_vector.hpp"
#include "tlcause/checker.hpp"
#include "tlcause/csv.hpp"
#include "tlcause/error.hpp"
#include "tlcause/formula.hpp"
#include "tlcause/trace.hpp"

namespace tlcause {

/// Candidate relationship: cause leads to effect within window.
struct Hypothesis {
    Formula cause;
    Formula effect;
    WindowBound window;
    std::optional<ProbBound> bound;  // asserted bound from a hypothesis file, if any

    [[nodiscard]] Formula as_formula() const { return make::leads_to(window, cause, effect, bound); }
    [[nodiscard]] std::string id() const { return print(make::leads_to(window, cause, effect)); }

    /// Identity order: cause text, effect text, window.
    friend bool operator<(const Hypothesis& a, const Hypothesis& b) {
        const auto ca = print(a.cause), cb = print(b.cause);
        if (ca != cb) return ca < cb;
        const auto ea = print(a.effect), eb = print(b.effect);
        if (ea != eb) return ea < eb;
        return a.window < b.window;
    }
};

/// Builds a hypothesis from a top-level leads-to formula.
inline Hypothesis hypothesis_from_formula(const Formula& f) {
    const auto* lt = f.as<LeadsTo>();
    if (!lt) throw DataError("hypothesis must be a leads-to formula: " + print(f));
    if (contains_leads_to(lt->cause) || contains_leads_to(lt->effect)) {
        throw DataError("nested leads-to is not supported: " + print(f));
    }
    return {lt->cause, lt->effect, lt->window, lt->bound};
}

struct CausalScore {
    Hypothesis hypothesis;
    ProbEstimate p_cause;     // frequency of the cause
    ProbEstimate p_leadsto;   // P(effect within window | cause)
    ProbEstimate p_marginal;  // frequency of the effect
    bool prima_facie = false;
    std::optional<double> epsilon_avg;
    std::size_t n_covariates = 0;  // defined epsilon_x terms in the average
    bool sole_cause = false;       // no other prima facie cause of the same effect
    std::optional<double> fallback_score;  // P(e|c) - P(e|!c), sole causes only
    std::optional<bool> bound_holds;       // measured p against an asserted bound
};

struct EngineOptions {
    /// Each conditioning cell of epsilon_x needs at least this many time points.
    std::size_t min_support = 5;
    /// Average over prima facie causes of the same effect across all windows,
    /// instead of per (effect, window).
    bool pool_windows = false;
};

/// Every ordered pair of atoms from distinct variables, for every window.
inline std::vector<Hypothesis> generate_pairwise(const Trace& trace, const std::vector<WindowBound>& windows) {
    if (windows.empty()) throw DataError("generate_pairwise: no windows given");
    for (const auto& w : windows) {
        if (w.lo < 1) throw DataError("generate_pairwise: window must start at 1 or later");
        if (!w.valid()) throw DataError("generate_pairwise: window lower bound exceeds upper bound");
    }
    std::vector<Hypothesis> out;
    const auto& atoms = trace.atoms();
    for (std::size_t c = 0; c < atoms.size(); ++c) {
        for (std::size_t e = 0; e < atoms.size(); ++e) {
            if (trace.variable_of(c) == trace.variable_of(e)) continue;
            for (const auto& w : windows) {
                out.push_back({make::atom(atoms[c]), make::atom(atoms[e]), w, std::nullopt});
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace detail {

inline void check_state_formula(const Formula& f) {
    if (contains_leads_to(f)) throw DataError("leads-to inside cause or effect: " + print(f));
}

inline CausalScore prima_facie_from_bits(const Hypothesis& h, const BitVector& cause, const BitVector& effect) {
    CausalScore s;
    s.hypothesis = h;
    s.p_cause = {cause.count(), cause.size()};
    s.p_marginal = {effect.count(), effect.size()};
    s.p_leadsto = estimate_leadsto(cause, effect, h.window);
    s.prima_facie = s.p_cause.numerator > 0 && s.p_leadsto.defined() &&
                    ProbEstimate::less(s.p_marginal, s.p_leadsto);
    if (h.bound && s.p_leadsto.defined()) s.bound_holds = h.bound->holds(*s.p_leadsto.value());
    return s;
}

inline std::optional<double> rate_difference(std::size_t hits_a, std::size_t n_a, std::size_t hits_b,
                                             std::size_t n_b, std::size_t min_support) {
    const std::size_t floor = std::max<std::size_t>(min_support, 1);
    if (n_a < floor || n_b < floor) return std::nullopt;
    return static_cast<double>(hits_a) / static_cast<double>(n_a) -
           static_cast<double>(hits_b) / static_cast<double>(n_b);
}

// Conditioning cells for one cause: time points with a valid window, split
// by whether the cause holds, each also intersected with the effect hits.
struct CauseCells {
    BitVector with_cause;
    BitVector with_cause_hit;
    BitVector without_cause;
    BitVector without_cause_hit;

    CauseCells(const BitVector& cause, const BitVector& valid, const BitVector& hits)
        : with_cause(cause & valid),
          with_cause_hit(with_cause & hits),
          without_cause(~cause & valid),
          without_cause_hit(without_cause & hits) {}

    [[nodiscard]] std::optional<double> epsilon(const BitVector& covariate, std::size_t min_support) const {
        return rate_difference(BitVector::count_and(with_cause_hit, covariate),
                               BitVector::count_and(with_cause, covariate),
                               BitVector::count_and(without_cause_hit, covariate),
                               BitVector::count_and(without_cause, covariate), min_support);
    }

    [[nodiscard]] std::optional<double> unconditional(std::size_t min_support) const {
        return rate_difference(with_cause_hit.count(), with_cause.count(), without_cause_hit.count(),
                               without_cause.count(), min_support);
    }
};

}  // namespace detail

/// Fills the prima facie fields: the cause occurs, the leads-to probability
/// p is defined, and the effect's marginal frequency is strictly below p.
inline CausalScore prima_facie_test(const Trace& trace, const Hypothesis& h) {
    detail::check_state_formula(h.cause);
    detail::check_state_formula(h.effect);
    return detail::prima_facie_from_bits(h, sat_bits(trace, h.cause), sat_bits(trace, h.effect));
}

/// P(e | c and x) - P(e | not c and x), where e means the effect occurs
/// within c's window after t and the covariate x is read as its cause's
/// truth at t. Undefined when either conditioning cell has fewer than
/// min_support time points.
inline std::optional<double> epsilon_x(const Trace& trace, const Hypothesis& c, const Hypothesis& x,
                                       const EngineOptions& options = {}) {
    if (!(c.effect == x.effect)) {
        throw DataError("epsilon_x: causes have different effects (" + print(c.effect) + " vs " +
                        print(x.effect) + ")");
    }
    detail::check_state_formula(c.cause);
    detail::check_state_formula(x.cause);
    const BitVector cause = sat_bits(trace, c.cause);
    const BitVector hits = window_hits(sat_bits(trace, c.effect), c.window);
    const detail::CauseCells cells(cause, window_valid(trace.length(), c.window.lo), hits);
    return cells.epsilon(sat_bits(trace, x.cause), options.min_support);
}

struct EpsilonAvg {
    std::optional<double> value;
    std::size_t n_terms = 0;  // defined epsilon_x terms
    bool sole_cause = false;
    std::optional<double> fallback;  // P(e|c) - P(e|!c) when sole_cause
};

/// Mean of the defined epsilon_x terms. Undefined terms are left out of both
/// the sum and the divisor.
inline std::optional<double> mean_of_defined(const std::vector<std::optional<double>>& terms) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& t : terms) {
        if (t) {
            sum += *t;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

/// Average significance of c over the other prima facie causes in X.
inline EpsilonAvg epsilon_avg(const Trace& trace, const Hypothesis& c, const std::vector<Hypothesis>& causes,
                              const EngineOptions& options = {}) {
    const auto self = c.id();
    bool found = false;
    std::vector<std::optional<double>> terms;
    for (const auto& x : causes) {
        if (x.id() == self) {
            found = true;
            continue;
        }
        terms.push_back(epsilon_x(trace, c, x, options));
    }
    if (!found) throw DataError("epsilon_avg: cause " + self + " is not in the prima facie set");
    EpsilonAvg out;
    out.value = mean_of_defined(terms);
    out.n_terms = static_cast<std::size_t>(std::count_if(terms.begin(), terms.end(),
                                                         [](const auto& t) { return t.has_value(); }));
    if (terms.empty()) {
        out.sole_cause = true;
        const BitVector cause = sat_bits(trace, c.cause);
        const BitVector hits = window_hits(sat_bits(trace, c.effect), c.window);
        out.fallback = detail::CauseCells(cause, window_valid(trace.length(), c.window.lo), hits)
                           .unconditional(options.min_support);
    }
    return out;
}

/// Prima facie test and epsilon_avg for every hypothesis. Causes are
/// compared only with other prima facie causes of the same effect (and the
/// same window unless pool_windows). Output is sorted by hypothesis identity.
inline std::vector<CausalScore> score_hypotheses(const Trace& trace, std::vector<Hypothesis> hypotheses,
                                                 const EngineOptions& options = {}) {
    std::sort(hypotheses.begin(), hypotheses.end());
    SatCache cache(trace);
    std::vector<CausalScore> scores;
    scores.reserve(hypotheses.size());
    for (const auto& h : hypotheses) {
        detail::check_state_formula(h.cause);
        detail::check_state_formula(h.effect);
        scores.push_back(detail::prima_facie_from_bits(h, cache.get(h.cause), cache.get(h.effect)));
    }

    using GroupKey = std::pair<std::string, std::optional<WindowBound>>;
    auto window_order = [](const GroupKey& a, const GroupKey& b) {
        if (a.first != b.first) return a.first < b.first;
        if (a.second.has_value() != b.second.has_value()) return b.second.has_value();
        return a.second && *a.second < *b.second;
    };
    std::map<GroupKey, std::vector<std::size_t>, decltype(window_order)> groups(window_order);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!scores[i].prima_facie) continue;
        const auto& h = scores[i].hypothesis;
        GroupKey key{print(h.effect), options.pool_windows ? std::nullopt
                                                           : std::optional<WindowBound>(h.window)};
        groups[key].push_back(i);
    }

    std::map<std::size_t, BitVector> valid_by_lo;
    for (const auto& [key, members] : groups) {
        for (std::size_t i : members) {
            auto& score = scores[i];
            const auto& h = score.hypothesis;
            auto vit = valid_by_lo.find(h.window.lo);
            if (vit == valid_by_lo.end()) {
                vit = valid_by_lo.emplace(h.window.lo, window_valid(trace.length(), h.window.lo)).first;
            }
            const BitVector hits = window_hits(cache.get(h.effect), h.window);
            const detail::CauseCells cells(cache.get(h.cause), vit->second, hits);
            std::vector<std::optional<double>> terms;
            terms.reserve(members.size());
            for (std::size_t j : members) {
                if (j == i) continue;
                terms.push_back(cells.epsilon(cache.get(scores[j].hypothesis.cause), options.min_support));
            }
            score.epsilon_avg = mean_of_defined(terms);
            score.n_covariates = static_cast<std::size_t>(
                std::count_if(terms.begin(), terms.end(), [](const auto& t) { return t.has_value(); }));
            if (terms.empty()) {
                score.sole_cause = true;
                score.fallback_score = cells.unconditional(options.min_support);
            }
        }
    }
    return scores;
}

struct Classification {
    std::vector<std::size_t> significant;    // |epsilon_avg| >= epsilon
    std::vector<std::size_t> insignificant;  // |epsilon_avg| < epsilon
};

/// Splits scores (indices into the input) by |epsilon_avg| against epsilon.
/// Every score must carry a defined epsilon_avg.
inline Classification classify(const std::vector<CausalScore>& scores, double epsilon) {
    if (!(epsilon >= 0.0)) throw DataError("classify: epsilon must be >= 0");
    Classification out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!scores[i].epsilon_avg) {
            throw DataError("classify: epsilon_avg undefined for " + scores[i].hypothesis.id());
        }
        if (std::abs(*scores[i].epsilon_avg) < epsilon) {
            out.insignificant.push_back(i);
        } else {
            out.significant.push_back(i);
        }
    }
    return out;
}

inline void write_scores_csv(std::ostream& out, const std::vector<CausalScore>& scores) {
    out << "cause,effect,window_lo,window_hi,p_leadsto,p_marginal,prima_facie,epsilon_avg,n_covariates,"
           "sole_cause,fallback_score\n";
    for (const auto& s : scores) {
        const auto& h = s.hypothesis;
        out << '"' << print(h.cause) << "\",\"" << print(h.effect) << "\"," << h.window.lo << ','
            << detail::format_hi(h.window.hi) << ',' << csv::format(s.p_leadsto.value()) << ','
            << csv::format(s.p_marginal.value()) << ',' << (s.prima_facie ? 1 : 0) << ','
            << csv::format(s.epsilon_avg) << ',' << s.n_covariates << ',' << (s.sole_cause ? 1 : 0)
            << ',' << csv::format(s.fallback_score) << '\n';
    }
}

}  // namespace tlcause
