#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tlcause/error.hpp"
#include "tlcause/granger.hpp"
#include "tlcause/trace.hpp"

namespace tlcause {

/// Dataset designs. B/E shift half the portfolios to one alternative lag,
/// C/F give half the portfolios a random lag per factor, D/E/F add
/// portfolio-to-portfolio error dependencies.
enum class Scenario { A, B, C, D, E, F };

inline Scenario parse_scenario(const std::string& text) {
    if (text.size() == 1) {
        switch (std::toupper(static_cast<unsigned char>(text[0]))) {
            case 'A': return Scenario::A;
            case 'B': return Scenario::B;
            case 'C': return Scenario::C;
            case 'D': return Scenario::D;
            case 'E': return Scenario::E;
            case 'F': return Scenario::F;
            default: break;
        }
    }
    throw DataError("invalid scenario '" + text + "' (expected one of A-F)");
}

inline char scenario_letter(Scenario s) { return static_cast<char>('A' + static_cast<int>(s)); }

inline bool has_one_lag(Scenario s) { return s == Scenario::B || s == Scenario::E; }
inline bool has_random_lag(Scenario s) { return s == Scenario::C || s == Scenario::F; }
inline bool has_dependencies(Scenario s) { return s == Scenario::D || s == Scenario::E || s == Scenario::F; }

struct NormalParams {
    double mean = 0.0;
    double sd = 1.0;
};

struct SimSpec {
    std::size_t n_portfolios = 25;
    std::size_t n_days = 3001;
    std::size_t n_factors = 3;
    std::size_t base_lag = 3;
    Scenario scenario = Scenario::A;
    std::size_t alt_lag = 1;
    std::size_t random_lag_lo = 0;
    std::size_t random_lag_hi = 3;
    std::size_t n_dependencies = 3;
    /// Per-factor beta distribution; empty means market N(1, 0.2^2) and
    /// N(0, 0.3^2) for the rest.
    std::vector<NormalParams> betas;
    /// Per-factor daily mean and volatility; empty means mean 0 with
    /// volatility 1.0 for the market and 0.5 for the rest.
    std::vector<NormalParams> factors;
    double factor_corr = 0.1;
    double residual_sd = 0.5;
    double residual_corr = 0.1;
    std::uint64_t seed = 0;
    /// Observed factor series (n_factors x rows) used instead of simulated
    /// factors. Period p reads rows [p * (T + H), (p + 1) * (T + H)), where H
    /// is the largest lag.
    std::vector<std::vector<double>> factor_data;

    [[nodiscard]] std::vector<NormalParams> resolved_betas() const {
        if (!betas.empty()) return betas;
        std::vector<NormalParams> out(n_factors, {0.0, 0.3});
        if (!out.empty()) out[0] = {1.0, 0.2};
        return out;
    }

    [[nodiscard]] std::vector<NormalParams> resolved_factors() const {
        if (!factors.empty()) return factors;
        std::vector<NormalParams> out(n_factors, {0.0, 0.5});
        if (!out.empty()) out[0] = {0.0, 1.0};
        return out;
    }

    [[nodiscard]] std::size_t max_lag() const {
        return std::max({base_lag, alt_lag, has_random_lag(scenario) ? random_lag_hi : 0});
    }

    void validate() const {
        auto fail = [](const std::string& m) { throw DataError("invalid simulation spec: " + m); };
        if (n_portfolios < 2) fail("need at least 2 portfolios");
        if (n_factors < 1) fail("need at least 1 factor");
        if (alt_lag > base_lag) fail("alt_lag must not exceed base_lag");
        if (random_lag_lo > random_lag_hi) fail("random lag range is empty");
        if (random_lag_hi > base_lag) fail("random lags must lie within [0, base_lag]");
        if (n_days <= base_lag + 1) fail("n_days must exceed base_lag + 1");
        if (has_dependencies(scenario) && 2 * n_dependencies > n_portfolios) {
            fail("n_dependencies needs 2 * n_dependencies <= n_portfolios");
        }
        if (!betas.empty() && betas.size() != n_factors) fail("one beta distribution per factor required");
        if (!factors.empty() && factors.size() != n_factors) fail("one factor distribution per factor required");
        for (const auto& b : resolved_betas()) {
            if (!(b.sd >= 0.0)) fail("beta sd must be >= 0");
        }
        for (const auto& f : resolved_factors()) {
            if (!(f.sd >= 0.0)) fail("factor sd must be >= 0");
        }
        if (!(residual_sd >= 0.0)) fail("residual_sd must be >= 0");
        if (!(residual_corr >= 0.0 && residual_corr < 1.0)) fail("residual_corr must lie in [0, 1)");
        const double k = static_cast<double>(n_factors);
        if (n_factors > 1 && !(factor_corr > -1.0 / (k - 1.0) && factor_corr < 1.0)) {
            fail("factor_corr must keep the correlation matrix positive definite");
        }
        if (!factor_data.empty() && factor_data.size() != n_factors) fail("factor_data needs one row per factor");
    }
};

enum class RelationKind { FactorProxy, Dependency };

inline const char* kind_name(RelationKind k) {
    return k == RelationKind::Dependency ? "dependency" : "factor-proxy";
}

struct TruthRelation {
    std::string source;
    std::string target;
    std::size_t delta = 1;
    RelationKind kind = RelationKind::FactorProxy;
    int sign = 1;  // expected direction of the association

    [[nodiscard]] auto key() const { return std::tie(source, target, delta); }
};

/// Portfolio-to-portfolio relations embedded by construction.
struct GroundTruth {
    std::vector<TruthRelation> relations;   // one per (source, target, delta), sorted
    std::vector<TruthRelation> alternates;  // other positive lag differences of the same pairs

    friend bool operator==(const GroundTruth& a, const GroundTruth& b) {
        auto same = [](const std::vector<TruthRelation>& x, const std::vector<TruthRelation>& y) {
            return x.size() == y.size() &&
                   std::equal(x.begin(), x.end(), y.begin(), [](const auto& p, const auto& q) {
                       return p.key() == q.key() && p.kind == q.kind && p.sign == q.sign;
                   });
        };
        return same(a.relations, b.relations) && same(a.alternates, b.alternates);
    }
};

/// Parameters shared by every period of a dataset.
struct SimStructure {
    std::vector<std::string> names;
    std::vector<std::string> factor_names;
    std::vector<std::vector<double>> betas;      // portfolio x factor
    std::vector<std::vector<std::size_t>> lags;  // portfolio x factor
    std::vector<bool> shifted;                   // portfolio in the designated half
    std::vector<std::pair<std::size_t, std::size_t>> dependencies;  // (source k, target i)
    GroundTruth ground_truth;
};

struct SimOutput {
    SimStructure structure;
    std::size_t period = 0;
    std::size_t history = 0;  // factor rows before day 0
    std::vector<std::vector<double>> returns;      // portfolio x day
    std::vector<std::vector<double>> errors;       // portfolio x day, including injected dependency
    std::vector<std::vector<double>> base_errors;  // portfolio x (day + 1), column 0 is day -1
    std::vector<std::vector<double>> factors;      // factor x (day + history)

    [[nodiscard]] std::size_t days() const { return returns.empty() ? 0 : returns.front().size(); }
    [[nodiscard]] const GroundTruth& ground_truth() const { return structure.ground_truth; }

    /// Factor j on day t, valid for t >= -history.
    [[nodiscard]] double factor(std::size_t j, std::ptrdiff_t t) const {
        return factors[j][static_cast<std::size_t>(t + static_cast<std::ptrdiff_t>(history))];
    }

    [[nodiscard]] std::vector<RawSeries> return_series() const { return as_series(returns); }
    [[nodiscard]] std::vector<RawSeries> error_series() const { return as_series(errors); }

    [[nodiscard]] std::vector<RawSeries> as_series(const std::vector<std::vector<double>>& rows) const {
        std::vector<RawSeries> out;
        for (std::size_t i = 0; i < rows.size(); ++i) out.push_back({structure.names[i], rows[i], {}});
        return out;
    }
};

inline std::vector<std::string> portfolio_names(std::size_t n) {
    const std::size_t digits = std::max<std::size_t>(2, std::to_string(n).size());
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= n; ++i) {
        auto s = std::to_string(i);
        out.push_back("P" + std::string(digits - s.size(), '0') + s);
    }
    return out;
}

/// Relations implied by betas, lags and dependencies. Portfolio a leads b by
/// delta when a's lag on some factor both load on (nonzero beta) is smaller
/// than b's; the smallest positive difference is canonical and the others
/// are alternates. Dependencies k -> i contribute (k, i, 1).
inline GroundTruth derive_ground_truth(const std::vector<std::string>& names,
                                       const std::vector<std::vector<double>>& betas,
                                       const std::vector<std::vector<std::size_t>>& lags,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& dependencies,
                                       const std::vector<NormalParams>& factor_params) {
    std::map<std::tuple<std::string, std::string, std::size_t>, TruthRelation> canonical;
    std::map<std::tuple<std::string, std::string, std::size_t>, TruthRelation> alternates;
    for (const auto& [k, i] : dependencies) {
        TruthRelation r{names[k], names[i], 1, RelationKind::Dependency, 1};
        canonical.emplace(r.key(), r);
    }
    const std::size_t n = names.size();
    const std::size_t factors = betas.empty() ? 0 : betas.front().size();
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (a == b) continue;
            std::map<std::size_t, double> covariance_by_delta;
            for (std::size_t j = 0; j < factors; ++j) {
                if (betas[a][j] == 0.0 || betas[b][j] == 0.0) continue;
                if (lags[b][j] <= lags[a][j]) continue;
                const double vol = factor_params.empty() ? 1.0 : factor_params[j].sd;
                covariance_by_delta[lags[b][j] - lags[a][j]] += betas[a][j] * betas[b][j] * vol * vol;
            }
            bool first = true;
            for (const auto& [delta, cov] : covariance_by_delta) {
                TruthRelation r{names[a], names[b], delta, RelationKind::FactorProxy, cov < 0.0 ? -1 : 1};
                if (first) {
                    canonical.emplace(r.key(), r);
                    first = false;
                } else {
                    alternates.emplace(r.key(), r);
                }
            }
        }
    }
    GroundTruth gt;
    for (auto& [key, r] : canonical) gt.relations.push_back(r);
    for (auto& [key, r] : alternates) {
        if (!canonical.count(key)) gt.alternates.push_back(r);
    }
    return gt;
}

namespace detail {

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
    return std::mt19937_64(seq);
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(idx[i - 1], idx[pick(rng)]);
    }
    return idx;
}

}  // namespace detail

/// Draws betas, lag table and dependency pairs from `spec.seed`.
inline SimStructure draw_structure(const SimSpec& spec) {
    spec.validate();
    auto rng = detail::stream(spec.seed, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    SimStructure s;
    s.names = portfolio_names(spec.n_portfolios);
    const std::vector<std::string> standard{"MKT", "SMB", "HML"};
    for (std::size_t j = 0; j < spec.n_factors; ++j) {
        s.factor_names.push_back(j < standard.size() ? standard[j] : "F" + std::to_string(j + 1));
    }
    const auto beta_params = spec.resolved_betas();
    s.betas.assign(spec.n_portfolios, std::vector<double>(spec.n_factors));
    for (auto& row : s.betas) {
        for (std::size_t j = 0; j < spec.n_factors; ++j) {
            row[j] = beta_params[j].mean + beta_params[j].sd * normal(rng);
        }
    }

    s.lags.assign(spec.n_portfolios, std::vector<std::size_t>(spec.n_factors, spec.base_lag));
    s.shifted.assign(spec.n_portfolios, false);
    const auto order = detail::shuffled_indices(spec.n_portfolios, rng);
    if (has_one_lag(spec.scenario) || has_random_lag(spec.scenario)) {
        std::uniform_int_distribution<std::size_t> random_lag(spec.random_lag_lo, spec.random_lag_hi);
        for (std::size_t r = 0; r < spec.n_portfolios / 2; ++r) {
            const std::size_t i = order[r];
            s.shifted[i] = true;
            for (std::size_t j = 0; j < spec.n_factors; ++j) {
                s.lags[i][j] = has_one_lag(spec.scenario) ? spec.alt_lag : random_lag(rng);
            }
        }
    }
    if (has_dependencies(spec.scenario)) {
        const auto pick = detail::shuffled_indices(spec.n_portfolios, rng);
        for (std::size_t d = 0; d < spec.n_dependencies; ++d) {
            s.dependencies.emplace_back(pick[spec.n_dependencies + d], pick[d]);
        }
        std::sort(s.dependencies.begin(), s.dependencies.end());
    }
    s.ground_truth = derive_ground_truth(s.names, s.betas, s.lags, s.dependencies, spec.resolved_factors());
    return s;
}

/// One period of returns r_{i,t} = sum_j beta_ij f_{j, t - lag_ij} + e_{i,t}
/// for a fixed structure. Each period draws from its own random stream.
inline SimOutput simulate_period(const SimSpec& spec, const SimStructure& structure, std::size_t period) {
    spec.validate();
    const std::size_t n = spec.n_portfolios;
    const std::size_t k = spec.n_factors;
    const std::size_t days = spec.n_days;
    const std::size_t history = spec.max_lag();
    auto rng = detail::stream(spec.seed, period + 1);
    std::normal_distribution<double> normal(0.0, 1.0);

    SimOutput out;
    out.structure = structure;
    out.period = period;
    out.history = history;

    out.factors.assign(k, std::vector<double>(days + history));
    if (!spec.factor_data.empty()) {
        const std::size_t rows = days + history;
        const std::size_t start = period * rows;
        for (std::size_t j = 0; j < k; ++j) {
            if (spec.factor_data[j].size() < start + rows) {
                throw DataError("factor data too short for period " + std::to_string(period + 1) + ": need " +
                                std::to_string(start + rows) + " rows");
            }
            std::copy_n(spec.factor_data[j].begin() + static_cast<std::ptrdiff_t>(start), rows,
                        out.factors[j].begin());
        }
    } else {
        const auto params = spec.resolved_factors();
        Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(k),
                                                         static_cast<Eigen::Index>(k), spec.factor_corr);
        corr.diagonal().setOnes();
        const Eigen::MatrixXd chol = corr.llt().matrixL();
        Eigen::VectorXd g(static_cast<Eigen::Index>(k));
        for (std::size_t t = 0; t < days + history; ++t) {
            for (Eigen::Index j = 0; j < g.size(); ++j) g(j) = normal(rng);
            const Eigen::VectorXd c = chol * g;
            for (std::size_t j = 0; j < k; ++j) {
                out.factors[j][t] = params[j].mean + params[j].sd * c(static_cast<Eigen::Index>(j));
            }
        }
    }

    // Base errors include day -1 so that day 0 can depend on the day before.
    const double common = std::sqrt(spec.residual_corr);
    const double own = std::sqrt(1.0 - spec.residual_corr);
    out.base_errors.assign(n, std::vector<double>(days + 1));
    for (std::size_t t = 0; t <= days; ++t) {
        const double shared = normal(rng);
        for (std::size_t i = 0; i < n; ++i) {
            out.base_errors[i][t] = spec.residual_sd * (common * shared + own * normal(rng));
        }
    }
    out.errors.assign(n, std::vector<double>(days));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < days; ++t) out.errors[i][t] = out.base_errors[i][t + 1];
    }
    for (const auto& [src, dst] : structure.dependencies) {
        for (std::size_t t = 0; t < days; ++t) out.errors[dst][t] += out.base_errors[src][t];
    }

    out.returns.assign(n, std::vector<double>(days));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < days; ++t) {
            double r = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                r += structure.betas[i][j] *
                     out.factor(j, static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(structure.lags[i][j]));
            }
            out.returns[i][t] = r + out.errors[i][t];
        }
    }
    return out;
}

inline SimOutput simulate(const SimSpec& spec) { return simulate_period(spec, draw_structure(spec), 0); }

/// Two non-overlapping periods with the same betas, lags and dependencies
/// and fresh factor and error draws.
inline std::pair<SimOutput, SimOutput> two_periods(const SimSpec& spec) {
    const auto structure = draw_structure(spec);
    return {simulate_period(spec, structure, 0), simulate_period(spec, structure, 1)};
}

/// Residuals of each portfolio's returns regressed on an intercept and the
/// same-day factors.
inline std::vector<std::vector<double>> residualize(const SimOutput& sim) {
    const std::size_t days = sim.days();
    const std::size_t k = sim.factors.size();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(days), static_cast<Eigen::Index>(k + 1));
    for (std::size_t t = 0; t < days; ++t) {
        x(static_cast<Eigen::Index>(t), 0) = 1.0;
        for (std::size_t j = 0; j < k; ++j) {
            x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j + 1)) =
                sim.factor(j, static_cast<std::ptrdiff_t>(t));
        }
    }
    std::vector<std::vector<double>> out;
    for (const auto& r : sim.returns) {
        const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(days));
        const auto fit = ols(x, y);
        out.emplace_back(fit.residuals.data(), fit.residuals.data() + fit.residuals.size());
    }
    return out;
}

}  // namespace tlcause
