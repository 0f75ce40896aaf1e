#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "tlcause/csv.hpp"
#include "tlcause/engine.hpp"
#include "tlcause/error.hpp"

namespace tlcause {

inline double normal_pdf(double z, double mean = 0.0, double sd = 1.0) {
    const double u = (z - mean) / sd;
    return std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * M_PI));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// z = Phi^{-1}(1 - p), computed from the lower quantile of p so that tiny
/// p-values keep their precision. p is clamped to [1e-300, 1 - 1e-16].
inline double p_to_z(double p) {
    const double clamped = std::clamp(p, 1e-300, 1.0 - 1e-16);
    return -boost::math::quantile(boost::math::normal_distribution<double>(), clamped);
}

// ---------------------------------------------------------------------------
// z-values

struct ZEntry {
    std::string id;
    double epsilon = 0.0;  // raw score (epsilon_avg, or the z itself for identity tables)
    double z = 0.0;
};

/// Scores mapped to z = (score - center) / scale.
struct ZTable {
    std::vector<ZEntry> entries;
    double center = 0.0;
    double scale = 1.0;

    [[nodiscard]] std::size_t size() const noexcept { return entries.size(); }
    [[nodiscard]] std::vector<double> z() const {
        std::vector<double> out;
        out.reserve(entries.size());
        for (const auto& e : entries) out.push_back(e.z);
        return out;
    }
    [[nodiscard]] double to_score(double z) const { return center + scale * z; }
};

/// Standardizes by the mean and population standard deviation
/// sqrt(sum (x - mean)^2 / n) of the values.
inline ZTable standardize(const std::vector<std::string>& ids, const std::vector<double>& values) {
    if (ids.size() != values.size()) throw DataError("standardize: ids and values differ in length");
    if (std::set<double>(values.begin(), values.end()).size() < 2) {
        throw NumericalError("standardize: fewer than 2 distinct values (zero variance)");
    }
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    ZTable t;
    t.center = mean;
    t.scale = std::sqrt(ss / n);
    for (std::size_t i = 0; i < values.size(); ++i) {
        t.entries.push_back({ids[i], values[i], (values[i] - mean) / t.scale});
    }
    return t;
}

/// Values that already are z-values (center 0, scale 1).
inline ZTable identity_ztable(const std::vector<std::string>& ids, const std::vector<double>& z) {
    if (ids.size() != z.size()) throw DataError("identity_ztable: ids and values differ in length");
    ZTable t;
    for (std::size_t i = 0; i < z.size(); ++i) t.entries.push_back({ids[i], z[i], z[i]});
    return t;
}

/// Standardized epsilon_avg of every score where it is defined.
inline ZTable to_zvalues(const std::vector<CausalScore>& scores) {
    std::vector<std::string> ids;
    std::vector<double> values;
    for (const auto& s : scores) {
        if (!s.epsilon_avg) continue;
        ids.push_back(s.hypothesis.id());
        values.push_back(*s.epsilon_avg);
    }
    return standardize(ids, values);
}

// ---------------------------------------------------------------------------
// Mixture density

namespace detail {

struct GlmFit {
    Eigen::VectorXd coefficients;
    bool converged = false;
};

// Poisson regression with log link by iteratively reweighted least squares,
// with step halving whenever the deviance increases.
inline GlmFit poisson_glm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int max_iter = 200) {
    const Eigen::Index n = x.rows();
    auto deviance = [&](const Eigen::VectorXd& mu) {
        double d = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (y(i) > 0) d += y(i) * std::log(y(i) / mu(i));
            d -= y(i) - mu(i);
        }
        return 2.0 * d;
    };
    Eigen::VectorXd mu = (y.array() + 0.5).matrix();
    Eigen::VectorXd eta = mu.array().log().matrix();
    // Start from the least-squares fit of log(y + 0.5).
    Eigen::VectorXd beta = x.colPivHouseholderQr().solve(eta);
    eta = x * beta;
    mu = eta.array().exp().matrix();
    double dev = deviance(mu);
    GlmFit fit;
    for (int iter = 0; iter < max_iter; ++iter) {
        const Eigen::VectorXd w = mu;
        const Eigen::VectorXd work = eta + ((y - mu).array() / mu.array()).matrix();
        const Eigen::VectorXd sw = w.array().sqrt().matrix();
        const Eigen::MatrixXd xw = sw.asDiagonal() * x;
        Eigen::VectorXd next = xw.colPivHouseholderQr().solve((sw.array() * work.array()).matrix());
        if (!next.allFinite()) break;
        double step = 1.0;
        Eigen::VectorXd cand = next;
        double cand_dev = std::numeric_limits<double>::infinity();
        for (int halving = 0; halving < 30; ++halving) {
            cand = beta + step * (next - beta);
            const Eigen::VectorXd cmu = (x * cand).array().exp().matrix();
            cand_dev = cmu.allFinite() ? deviance(cmu) : std::numeric_limits<double>::infinity();
            if (std::isfinite(cand_dev) && cand_dev <= dev * (1.0 + 1e-12) + 1e-12) break;
            step *= 0.5;
        }
        if (!std::isfinite(cand_dev)) break;
        const double change = std::abs(dev - cand_dev) / (std::abs(cand_dev) + 0.1);
        beta = cand;
        eta = x * beta;
        mu = eta.array().exp().matrix();
        dev = cand_dev;
        if (change < 1e-10) {
            fit.converged = true;
            break;
        }
    }
    fit.coefficients = beta;
    if (!beta.allFinite()) fit.converged = false;
    return fit;
}

// Legendre polynomials P_0..P_degree at u in [-1, 1].
inline Eigen::RowVectorXd legendre_row(double u, int degree) {
    Eigen::RowVectorXd row(degree + 1);
    row(0) = 1.0;
    if (degree >= 1) row(1) = u;
    for (int k = 2; k <= degree; ++k) {
        row(k) = ((2.0 * k - 1.0) * u * row(k - 1) - (k - 1.0) * row(k - 2)) / k;
    }
    return row;
}

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= sorted.size()) return sorted.back();
    return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

inline double robust_scale(std::vector<double> z) {
    std::sort(z.begin(), z.end());
    return (quantile_sorted(z, 0.75) - quantile_sorted(z, 0.25)) / 1.349;
}

}  // namespace detail

enum class DensityMethod { PoissonPolynomial, Kernel };

/// Smoothed density of the observed z-values over a binned grid.
struct MixtureFit {
    DensityMethod method = DensityMethod::PoissonPolynomial;
    double lo = 0.0;
    double hi = 0.0;
    double width = 0.0;
    std::size_t n = 0;
    std::vector<double> centers;
    std::vector<double> counts;
    int degree = 0;
    Eigen::VectorXd coefficients;  // Legendre coefficients of log density (unnormalized)
    double log_normalizer = 0.0;
    std::vector<double> sample;    // kernel method only
    double bandwidth = 0.0;        // kernel method only
    std::vector<std::string> warnings;

    [[nodiscard]] double density(double z) const {
        if (method == DensityMethod::Kernel) {
            double s = 0.0;
            for (double v : sample) s += normal_pdf(z, v, bandwidth);
            return s / static_cast<double>(sample.size());
        }
        const double u = 2.0 * (z - lo) / (hi - lo) - 1.0;
        return std::exp(detail::legendre_row(u, degree).dot(coefficients) - log_normalizer);
    }

    [[nodiscard]] std::vector<double> grid_density() const {
        std::vector<double> out;
        out.reserve(centers.size());
        for (double c : centers) out.push_back(density(c));
        return out;
    }
};

struct MixtureOptions {
    std::size_t bins = 120;
    int degree = 7;
    double margin_fraction = 0.05;  // grid extends this fraction of the z range on each side
    std::size_t min_count = 20;
};

/// Histograms z into equal-width bins and fits log f by Poisson regression
/// on a polynomial basis. Falls back to a Gaussian kernel estimate (with a
/// warning) when the regression fails or too few bins are occupied.
inline MixtureFit fit_mixture(const ZTable& table, const MixtureOptions& options = {}) {
    const auto z = table.z();
    if (z.size() < options.min_count) {
        throw NumericalError("fit_mixture: need at least " + std::to_string(options.min_count) +
                             " z-values, got " + std::to_string(z.size()));
    }
    if (options.bins < 3 || options.degree < 2) throw DataError("fit_mixture: bins >= 3 and degree >= 2 required");
    const auto [min_it, max_it] = std::minmax_element(z.begin(), z.end());
    const double range = *max_it - *min_it;
    if (!(range > 0.0)) throw NumericalError("fit_mixture: degenerate range (all z-values equal)");

    MixtureFit fit;
    fit.n = z.size();
    fit.degree = options.degree;
    fit.lo = *min_it - options.margin_fraction * range;
    fit.hi = *max_it + options.margin_fraction * range;
    fit.width = (fit.hi - fit.lo) / static_cast<double>(options.bins);
    fit.counts.assign(options.bins, 0.0);
    for (std::size_t k = 0; k < options.bins; ++k) {
        fit.centers.push_back(fit.lo + (static_cast<double>(k) + 0.5) * fit.width);
    }
    for (double v : z) {
        auto k = static_cast<std::size_t>((v - fit.lo) / fit.width);
        fit.counts[std::min(k, options.bins - 1)] += 1.0;
    }
    const auto occupied = static_cast<int>(std::count_if(fit.counts.begin(), fit.counts.end(),
                                                         [](double c) { return c > 0; }));

    bool ok = occupied > options.degree;
    if (ok) {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(options.bins), options.degree + 1);
        Eigen::VectorXd y(static_cast<Eigen::Index>(options.bins));
        for (std::size_t k = 0; k < options.bins; ++k) {
            const double u = 2.0 * (fit.centers[k] - fit.lo) / (fit.hi - fit.lo) - 1.0;
            x.row(static_cast<Eigen::Index>(k)) = detail::legendre_row(u, options.degree);
            y(static_cast<Eigen::Index>(k)) = fit.counts[k];
        }
        auto glm = detail::poisson_glm(x, y);
        ok = glm.converged;
        if (ok) {
            fit.coefficients = glm.coefficients;
            // Normalize so the density integrates to 1 over the grid.
            double mass = 0.0;
            for (std::size_t k = 0; k < options.bins; ++k) {
                mass += std::exp(x.row(static_cast<Eigen::Index>(k)).dot(fit.coefficients));
            }
            fit.log_normalizer = std::log(mass * fit.width);
            ok = std::isfinite(fit.log_normalizer);
        }
        if (!ok) fit.warnings.push_back("poisson regression did not converge; using kernel density");
    } else {
        fit.warnings.push_back("only " + std::to_string(occupied) +
                               " occupied bins; using kernel density");
    }

    if (!ok) {
        fit.method = DensityMethod::Kernel;
        fit.sample = z;
        // Silverman's rule, falling back to the standard deviation when the IQR is 0.
        const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
        double ss = 0.0;
        for (double v : z) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(z.size() - 1));
        const double iqr_scale = detail::robust_scale(z);
        const double spread = iqr_scale > 0.0 ? std::min(sd, iqr_scale) : sd;
        fit.bandwidth = 0.9 * spread * std::pow(static_cast<double>(z.size()), -0.2);
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Null density

enum class NullMode { Empirical, Theoretical };
enum class NullSource { Empirical, Theoretical };

struct NullOptions {
    NullMode mode = NullMode::Empirical;
    /// Half-width of the central window, in units of the robust z spread
    /// (IQR / 1.349) and never more than this many z units.
    double half_width = 1.5;
    /// Above this estimated non-null proportion an empirical null is flagged
    /// as unreliable.
    double max_nonnull = 0.10;
};

/// Normal null density f0 = N(delta, sigma^2) in z units.
struct NullFit {
    double delta = 0.0;
    double sigma = 1.0;
    double p0 = 1.0;  // estimated null proportion
    NullSource source = NullSource::Theoretical;
    double window_lo = 0.0;
    double window_hi = 0.0;
    bool fell_back = false;   // empirical fit requested but theoretical used
    bool unreliable = false;  // estimated non-null proportion above the limit
    std::vector<std::string> warnings;

    [[nodiscard]] double density(double z) const { return normal_pdf(z, delta, sigma); }
};

namespace detail {

inline void estimate_p0(NullFit& null, const std::vector<double>& z, const NullOptions& options) {
    const double half = std::max((null.window_hi - null.window_lo) / 2.0, 1e-12);
    const double lo = null.delta - half;
    const double hi = null.delta + half;
    const auto inside = std::count_if(z.begin(), z.end(), [&](double v) { return v >= lo && v <= hi; });
    const double expected_fraction = 2.0 * normal_cdf(half / null.sigma) - 1.0;
    null.p0 = std::clamp(static_cast<double>(inside) / (static_cast<double>(z.size()) * expected_fraction),
                         0.0, 1.0);
    if (options.mode == NullMode::Empirical && 1.0 - null.p0 > options.max_nonnull) {
        null.unreliable = true;
        null.warnings.push_back("estimated non-null proportion " + csv::format(1.0 - null.p0) +
                                " exceeds " + csv::format(options.max_nonnull) +
                                "; the empirical null is unreliable");
    }
}

}  // namespace detail

/// Central matching: a quadratic log-density fitted to the bin counts within
/// a window around the mode of f gives the location (vertex) and scale
/// (curvature) of the null. Falls back to N(0,1) with a warning when the
/// window holds under half the mass or the fit is not concave.
inline NullFit fit_empirical_null(const ZTable& table, const MixtureFit& mixture, const NullOptions& options = {}) {
    const auto z = table.z();
    NullFit null;
    auto theoretical = [&](const std::string& why) {
        null.delta = 0.0;
        null.sigma = 1.0;
        null.source = NullSource::Theoretical;
        if (!why.empty()) {
            null.fell_back = true;
            null.warnings.push_back(why + "; using the theoretical N(0,1) null");
        }
    };

    const double spread = detail::robust_scale(z);
    const double half = std::min(options.half_width, options.half_width * spread);

    if (options.mode == NullMode::Theoretical) {
        theoretical("");
    } else if (z.size() < 20) {
        theoretical("fewer than 20 z-values");
    } else if (!(half > 0.0)) {
        theoretical("zero spread in z-values");
    } else {
        const auto grid = mixture.grid_density();
        const auto mode_it = std::max_element(grid.begin(), grid.end());
        const double mode = mixture.centers[static_cast<std::size_t>(mode_it - grid.begin())];
        std::vector<double> xs, ys;
        double mass = 0.0;
        for (std::size_t k = 0; k < mixture.centers.size(); ++k) {
            if (std::abs(mixture.centers[k] - mode) <= half) {
                xs.push_back(mixture.centers[k] - mode);
                ys.push_back(mixture.counts[k]);
                mass += mixture.counts[k];
            }
        }
        null.window_lo = mode - half;
        null.window_hi = mode + half;
        if (xs.size() < 3) {
            theoretical("central window spans fewer than 3 bins");
        } else if (mass < 0.5 * static_cast<double>(z.size())) {
            theoretical("central window holds under half of the z-values");
        } else {
            Eigen::MatrixXd x(static_cast<Eigen::Index>(xs.size()), 3);
            Eigen::VectorXd y(static_cast<Eigen::Index>(xs.size()));
            for (std::size_t i = 0; i < xs.size(); ++i) {
                const auto r = static_cast<Eigen::Index>(i);
                x(r, 0) = 1.0;
                x(r, 1) = xs[i];
                x(r, 2) = xs[i] * xs[i];
                y(r) = ys[i];
            }
            const auto glm = detail::poisson_glm(x, y);
            const double b = glm.coefficients(1);
            const double c = glm.coefficients(2);
            if (!glm.converged || !(c < 0.0)) {
                theoretical("central fit is not concave");
            } else {
                null.source = NullSource::Empirical;
                null.sigma = std::sqrt(-1.0 / (2.0 * c));
                null.delta = mode - b / (2.0 * c);
            }
        }
    }
    if (null.source == NullSource::Theoretical) {
        const double h = half > 0.0 ? half : options.half_width;
        null.window_lo = null.delta - h;
        null.window_hi = null.delta + h;
    }
    detail::estimate_p0(null, z, options);
    return null;
}

// ---------------------------------------------------------------------------
// Local fdr

struct FdrEntry {
    std::string id;
    double epsilon = 0.0;
    double z = 0.0;
    double raw_fdr = 1.0;  // min(1, f0/f)
    double fdr = 1.0;      // after tail monotonization
    bool significant = false;
};

struct FdrOptions {
    double threshold = 0.01;
    bool monotone = true;
};

struct FdrReport {
    std::vector<FdrEntry> entries;
    MixtureFit mixture;
    NullFit null;
    double threshold = 0.01;
    double center = 0.0;  // z = (score - center) / scale
    double scale = 1.0;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t significant_count() const {
        return static_cast<std::size_t>(
            std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.significant; }));
    }
};

/// fdr(z) = min(1, f0(z) / f(z)) per entry; the null proportion p0 is left
/// out, so this bounds the posterior null probability from above. With
/// `monotone`, fdr is made non-increasing moving away from the null center
/// in each tail. Labels entries with fdr < threshold as significant.
inline FdrReport local_fdr(const ZTable& table, const MixtureFit& mixture, const NullFit& null,
                           const FdrOptions& options = {}) {
    FdrReport report;
    report.mixture = mixture;
    report.null = null;
    report.threshold = options.threshold;
    report.center = table.center;
    report.scale = table.scale;
    report.warnings = mixture.warnings;
    report.warnings.insert(report.warnings.end(), null.warnings.begin(), null.warnings.end());
    for (const auto& e : table.entries) {
        const double f = mixture.density(e.z);
        if (!(f > 0.0) || !std::isfinite(f)) {
            throw NumericalError("local_fdr: fitted density is zero at observed z = " + csv::format(e.z));
        }
        const double ratio = std::min(1.0, null.density(e.z) / f);
        report.entries.push_back({e.id, e.epsilon, e.z, ratio, ratio, false});
    }
    if (options.monotone) {
        std::vector<std::size_t> upper, lower;
        for (std::size_t i = 0; i < report.entries.size(); ++i) {
            (report.entries[i].z >= null.delta ? upper : lower).push_back(i);
        }
        auto& entries = report.entries;
        std::stable_sort(upper.begin(), upper.end(), [&](auto a, auto b) { return entries[a].z < entries[b].z; });
        std::stable_sort(lower.begin(), lower.end(), [&](auto a, auto b) { return entries[a].z > entries[b].z; });
        for (const auto* tail : {&upper, &lower}) {
            double running = 1.0;
            for (std::size_t i : *tail) {
                running = std::min(running, entries[i].raw_fdr);
                entries[i].fdr = running;
            }
        }
    }
    for (auto& e : report.entries) e.significant = e.fdr < options.threshold;
    return report;
}

/// Smallest |score| among significant entries; undefined when none are.
inline std::optional<double> threshold_from_fdr(const FdrReport& report) {
    std::optional<double> out;
    for (const auto& e : report.entries) {
        if (e.significant && (!out || std::abs(e.epsilon) < *out)) out = std::abs(e.epsilon);
    }
    return out;
}

/// Replaces fdr labels with a hand-chosen cutoff: significant iff |z| >= cutoff.
inline void apply_manual_z(FdrReport& report, double cutoff) {
    for (auto& e : report.entries) e.significant = std::abs(e.z) >= cutoff;
}

/// Replaces fdr labels with a hand-chosen cutoff on the raw score.
inline void apply_manual_epsilon(FdrReport& report, double cutoff) {
    for (auto& e : report.entries) e.significant = std::abs(e.epsilon) >= cutoff;
}

/// Benjamini-Hochberg step-up: rejects the k smallest p-values, k the
/// largest rank with p_(k) <= k q / m.
inline std::vector<bool> benjamini_hochberg(const std::vector<double>& p, double q) {
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
    std::size_t k = 0;
    for (std::size_t r = 0; r < m; ++r) {
        if (p[order[r]] <= static_cast<double>(r + 1) * q / static_cast<double>(m)) k = r + 1;
    }
    std::vector<bool> out(m, false);
    for (std::size_t r = 0; r < k; ++r) out[order[r]] = true;
    return out;
}

/// Full pipeline from a z table: fit f, fit f0, compute fdr.
inline FdrReport run_fdr(const ZTable& table, const MixtureOptions& mixture_options = {},
                         const NullOptions& null_options = {}, const FdrOptions& fdr_options = {}) {
    const auto mixture = fit_mixture(table, mixture_options);
    const auto null = fit_empirical_null(table, mixture, null_options);
    return local_fdr(table, mixture, null, fdr_options);
}

inline double skewness(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double m2 = 0.0, m3 = 0.0;
    for (double x : v) {
        m2 += (x - mean) * (x - mean);
        m3 += (x - mean) * (x - mean) * (x - mean);
    }
    m2 /= n;
    m3 /= n;
    return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

inline void write_fdr_csv(std::ostream& out, const FdrReport& report) {
    out << "hypothesis,epsilon_avg,z,fdr,label\n";
    for (const auto& e : report.entries) {
        out << '"' << e.id << "\"," << csv::format(e.epsilon) << ',' << csv::format(e.z) << ','
            << csv::format(e.fdr) << ',' << (e.significant ? "significant" : "null") << '\n';
    }
}

/// Plot-ready histogram of z with the fitted f and f0, both as densities
/// and as expected bin counts (f0 scaled by p0).
inline void write_fdr_histogram_csv(std::ostream& out, const FdrReport& report) {
    const auto& m = report.mixture;
    const double n = static_cast<double>(m.n);
    out << "z,count,f,f0,f_count,f0_count\n";
    for (std::size_t k = 0; k < m.centers.size(); ++k) {
        const double f = m.density(m.centers[k]);
        const double f0 = report.null.density(m.centers[k]);
        out << csv::format(m.centers[k]) << ',' << m.counts[k] << ',' << csv::format(f) << ','
            << csv::format(f0) << ',' << csv::format(f * n * m.width) << ','
            << csv::format(report.null.p0 * f0 * n * m.width) << '\n';
    }
}

}  // namespace tlcause
