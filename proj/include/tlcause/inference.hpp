#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tlcause/engine.hpp"
#include "tlcause/evaluation.hpp"
#include "tlcause/fdr.hpp"
#include "tlcause/granger.hpp"
#include "tlcause/trace.hpp"

namespace tlcause {

/// Settings for the pairwise temporal-logic pipeline.
struct InferConfig {
    std::vector<std::size_t> lags{1, 2, 3};  // exact-lag windows [l, l]
    DiscretizationRule discretization{};
    EngineOptions engine{};
    MixtureOptions mixture{};
    NullOptions null{};
    FdrOptions fdr{};
    std::optional<double> manual_z;        // label by |z| >= cutoff instead of fdr
    std::optional<double> manual_epsilon;  // label by |epsilon_avg| >= cutoff instead of fdr
};

struct InferResult {
    std::size_t n_hypotheses = 0;
    std::vector<CausalScore> scores;
    FdrReport report;
    std::vector<std::size_t> tested;  // score index of each report entry
    RelationSet relations;            // significant relations at variable level
    std::vector<std::string> warnings;

    /// True when the fdr stage had to fall back or flagged its null fit.
    [[nodiscard]] bool numerical_warning() const { return report.null.fell_back || report.null.unreliable ||
                                                         report.mixture.method == DensityMethod::Kernel; }
};

inline std::vector<WindowBound> exact_windows(const std::vector<std::size_t>& lags) {
    std::vector<WindowBound> out;
    for (auto l : lags) out.push_back(WindowBound::exact(l));
    return out;
}

/// Scores already computed: standardize, fit the fdr model, label, and
/// collect variable-level relations from the atomic hypotheses.
inline InferResult infer_from_scores(std::vector<CausalScore> scores, const InferConfig& config) {
    InferResult out;
    out.n_hypotheses = scores.size();
    out.scores = std::move(scores);
    std::vector<std::string> ids;
    std::vector<double> values;
    for (std::size_t i = 0; i < out.scores.size(); ++i) {
        if (!out.scores[i].epsilon_avg) continue;
        out.tested.push_back(i);
        ids.push_back(out.scores[i].hypothesis.id());
        values.push_back(*out.scores[i].epsilon_avg);
    }
    const ZTable table = standardize(ids, values);
    out.report = run_fdr(table, config.mixture, config.null, config.fdr);
    if (config.manual_z) apply_manual_z(out.report, *config.manual_z);
    if (config.manual_epsilon) apply_manual_epsilon(out.report, *config.manual_epsilon);
    for (std::size_t k = 0; k < out.tested.size(); ++k) {
        if (!out.report.entries[k].significant) continue;
        const auto& s = out.scores[out.tested[k]];
        if (!s.hypothesis.cause.as<Atom>() || !s.hypothesis.effect.as<Atom>()) continue;
        out.relations.insert(relation_from_hypothesis(s.hypothesis, *s.epsilon_avg));
    }
    out.warnings = out.report.warnings;
    return out;
}

/// Trace -> pairwise hypotheses -> prima facie -> epsilon_avg -> z -> fdr.
inline InferResult infer(const Trace& trace, const InferConfig& config) {
    auto hypotheses = generate_pairwise(trace, exact_windows(config.lags));
    return infer_from_scores(score_hypotheses(trace, std::move(hypotheses), config.engine), config);
}

inline InferResult infer(const std::vector<RawSeries>& series, const InferConfig& config) {
    return infer(discretize(series, config.discretization), config);
}

/// Settings for the Granger baseline. The null defaults to the theoretical
/// N(0,1) since Granger p-values are calibrated by construction.
struct GrangerConfig {
    std::vector<std::size_t> lags{1, 2, 3};
    MixtureOptions mixture{};
    NullOptions null{NullMode::Theoretical};
    FdrOptions fdr{};
    std::optional<double> bh_q;  // label by Benjamini-Hochberg at level q instead of local fdr
};

struct GrangerRun {
    std::vector<GrangerResult> results;  // lag-major, then (source, target)
    FdrReport report;
    std::vector<bool> significant;
    RelationSet relations;
    std::vector<std::string> warnings;

    [[nodiscard]] bool numerical_warning() const { return report.null.fell_back || report.null.unreliable ||
                                                         report.mixture.method == DensityMethod::Kernel; }
};

inline std::string granger_id(const GrangerResult& r) {
    return r.source + " -> " + r.target + " @" + std::to_string(r.lag);
}

/// Every ordered pair at every lag, p-values mapped to z = Phi^-1(1 - p),
/// then labeled by local fdr (upper tail only) or Benjamini-Hochberg.
inline GrangerRun run_granger(const std::vector<RawSeries>& series, const GrangerConfig& config) {
    GrangerRun out;
    for (auto lag : config.lags) {
        auto batch = granger_all_pairs(series, lag);
        out.results.insert(out.results.end(), batch.begin(), batch.end());
    }
    std::vector<std::string> ids;
    std::vector<double> z, p;
    for (const auto& r : out.results) {
        ids.push_back(granger_id(r));
        z.push_back(p_to_z(r.p_value));
        p.push_back(r.p_value);
    }
    const auto table = identity_ztable(ids, z);
    std::optional<double> bh_q = config.bh_q;
    if (table.size() < config.mixture.min_count) {
        // Too few tests to fit a density: Benjamini-Hochberg at the fdr level.
        out.report.threshold = config.fdr.threshold;
        for (const auto& e : table.entries) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            out.report.entries.push_back({e.id, e.epsilon, e.z, nan, nan, false});
        }
        out.report.null.fell_back = true;
        out.report.warnings.push_back("only " + std::to_string(table.size()) +
                                      " tests, too few for a density fit; labeled by Benjamini-Hochberg");
        if (!bh_q) bh_q = config.fdr.threshold;
    } else {
        out.report = run_fdr(table, config.mixture, config.null, config.fdr);
        for (auto& e : out.report.entries) e.significant = e.significant && e.z > 0.0;
    }
    out.significant.resize(out.results.size());
    if (bh_q) {
        out.significant = benjamini_hochberg(p, *bh_q);
        for (std::size_t i = 0; i < out.results.size(); ++i) out.report.entries[i].significant = out.significant[i];
    } else {
        for (std::size_t i = 0; i < out.results.size(); ++i) out.significant[i] = out.report.entries[i].significant;
    }
    out.relations = relations_from_granger(out.results, out.significant);
    out.warnings = out.report.warnings;
    return out;
}

}  // namespace tlcause
