#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>

#include "tlcause/csv.hpp"
#include "tlcause/error.hpp"
#include "tlcause/trace.hpp"

namespace tlcause {

/// Outcome of testing whether `source` Granger-causes `target` with L lags.
struct GrangerResult {
    std::string source;
    std::string target;
    std::size_t lag = 1;
    double f = 0.0;
    double p_value = 1.0;
    std::size_t df_num = 0;
    std::size_t df_den = 0;
    double rss_restricted = 0.0;
    double rss_unrestricted = 0.0;
};

/// P(F > f) for F ~ F(d1, d2), via the regularized incomplete beta function.
inline double f_upper_tail(double f, double d1, double d2) {
    if (!(f > 0.0)) return 1.0;
    if (std::isinf(f)) return 0.0;
    return boost::math::ibeta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

struct OlsFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd residuals;
    double rss = 0.0;
};

/// Least squares through a column-pivoted Householder QR. Throws
/// NumericalError when the design is rank deficient.
inline OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < x.cols()) {
        throw NumericalError("rank-deficient design (collinear regressors): rank " +
                             std::to_string(qr.rank()) + " of " + std::to_string(x.cols()));
    }
    OlsFit fit;
    fit.coefficients = qr.solve(y);
    fit.residuals = y - x * fit.coefficients;
    fit.rss = fit.residuals.squaredNorm();
    return fit;
}

/// Does `source` help predict `target` beyond target's own L lags?
/// Restricted: target_t on 1, target_{t-1..t-L}. Unrestricted adds
/// source_{t-1..t-L}. Rows t = L..T-1, so n = T - L observations and the
/// denominator has n - 2L - 1 degrees of freedom.
inline GrangerResult granger_test(const RawSeries& target, const RawSeries& source, std::size_t lag) {
    if (lag < 1) throw DataError("granger_test: lag must be >= 1");
    const std::size_t len = target.values.size();
    if (source.values.size() != len) throw DataError("granger_test: series lengths differ");
    if (len < 3 * lag + 2) {
        throw DataError("granger_test: series of length " + std::to_string(len) + " too short for lag " +
                        std::to_string(lag));
    }
    auto constant = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    };
    if (constant(target.values)) throw NumericalError("granger_test: series '" + target.name + "' is constant");
    if (constant(source.values)) throw NumericalError("granger_test: series '" + source.name + "' is constant");

    const auto n = static_cast<Eigen::Index>(len - lag);
    const auto l = static_cast<Eigen::Index>(lag);
    Eigen::MatrixXd full(n, 1 + 2 * l);
    Eigen::VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto t = static_cast<std::size_t>(r) + lag;
        y(r) = target.values[t];
        full(r, 0) = 1.0;
        for (Eigen::Index k = 1; k <= l; ++k) {
            full(r, k) = target.values[t - static_cast<std::size_t>(k)];
            full(r, l + k) = source.values[t - static_cast<std::size_t>(k)];
        }
    }
    GrangerResult out;
    out.source = source.name;
    out.target = target.name;
    out.lag = lag;
    out.df_num = lag;
    out.df_den = static_cast<std::size_t>(n) - 2 * lag - 1;
    try {
        out.rss_restricted = ols(full.leftCols(1 + l), y).rss;
        out.rss_unrestricted = ols(full, y).rss;
    } catch (const NumericalError& e) {
        throw NumericalError("granger_test " + source.name + " -> " + target.name + ": " + e.what());
    }
    // Nested models: RSS_u <= RSS_r up to rounding.
    const double diff = std::max(0.0, out.rss_restricted - out.rss_unrestricted);
    if (out.rss_unrestricted <= 0.0) {
        out.f = diff > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    } else {
        out.f = (diff / static_cast<double>(out.df_num)) /
                (out.rss_unrestricted / static_cast<double>(out.df_den));
    }
    out.p_value = f_upper_tail(out.f, static_cast<double>(out.df_num), static_cast<double>(out.df_den));
    return out;
}

/// Every ordered pair of distinct series, sorted by (source, target).
inline std::vector<GrangerResult> granger_all_pairs(const std::vector<RawSeries>& series, std::size_t lag) {
    std::vector<std::size_t> order(series.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return series[a].name < series[b].name; });
    std::vector<GrangerResult> out;
    for (std::size_t s : order) {
        for (std::size_t t : order) {
            if (s == t) continue;
            out.push_back(granger_test(series[t], series[s], lag));
        }
    }
    return out;
}

inline void write_granger_csv(std::ostream& out, const std::vector<GrangerResult>& results) {
    out << "source,target,lag,F,p\n";
    for (const auto& r : results) {
        out << r.source << ',' << r.target << ',' << r.lag << ',' << csv::format(r.f) << ','
            << csv::format(r.p_value) << '\n';
    }
}

}  // namespace tlcause
