#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "tlcause/fdr.hpp"

using namespace tlcause;

namespace {

double phi(double z, double m = 0.0, double s = 1.0) {
    const double u = (z - m) / s;
    return std::exp(-0.5 * u * u) / (s * std::sqrt(2.0 * M_PI));
}

ZTable sample_table(std::uint64_t seed, std::size_t n, double p1 = 0.0, double mu1 = 3.0, double sd1 = 1.0,
                    double mu0 = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::bernoulli_distribution alt(p1);
    std::vector<std::string> ids;
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back("h" + std::to_string(i));
        v.push_back(alt(rng) ? mu1 + sd1 * z(rng) : mu0 + z(rng));
    }
    return identity_ztable(ids, v);
}

MixtureFit kernel_at(std::vector<double> points, double bandwidth) {
    MixtureFit m;
    m.method = DensityMethod::Kernel;
    m.sample = std::move(points);
    m.bandwidth = bandwidth;
    return m;
}

}  // namespace

TEST(ToZValues, PopulationStandardDeviation) {
    const auto t = standardize({"a", "b", "c"}, {-1.0, 0.0, 1.0});
    EXPECT_NEAR(t.entries[0].z, -1.224744871391589, 1e-12);
    EXPECT_NEAR(t.entries[1].z, 0.0, 1e-15);
    EXPECT_NEAR(t.entries[2].z, 1.224744871391589, 1e-12);
    EXPECT_NEAR(t.scale, std::sqrt(2.0 / 3.0), 1e-15);
}

TEST(ToZValues, LocationInvariance) {
    const std::vector<double> v{0.1, -0.3, 0.25, 0.0, 0.07};
    std::vector<double> shifted;
    for (double x : v) shifted.push_back(x + 12.5);
    const std::vector<std::string> ids(v.size(), "h");
    const auto a = standardize(ids, v);
    const auto b = standardize(ids, shifted);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(a.entries[i].z, b.entries[i].z, 1e-12);
}

TEST(ToZValues, MeanMapsToZero) {
    const auto t = standardize({"a", "b", "c", "d"}, {1.0, 2.0, 3.0, 2.0});
    EXPECT_NEAR(t.entries[1].z, 0.0, 1e-15);
    EXPECT_NEAR(t.to_score(t.entries[2].z), 3.0, 1e-12);
}

TEST(ToZValues, ZeroVarianceIsAnError) {
    EXPECT_THROW(standardize({"a", "b"}, {0.5, 0.5}), NumericalError);
    EXPECT_THROW(standardize({"a"}, {0.5, 0.2}), DataError);
}

TEST(ToZValues, SkipsUndefinedScores) {
    std::vector<CausalScore> scores(3);
    scores[0].epsilon_avg = 0.1;
    scores[2].epsilon_avg = -0.1;
    for (auto& s : scores) s.hypothesis = {make::atom("a"), make::atom("b"), {1, 1}, std::nullopt};
    EXPECT_EQ(to_zvalues(scores).size(), 2u);
}

TEST(FitMixture, StandardNormalWithinSupDistance) {
    const auto table = sample_table(1, 10000);
    const auto f = fit_mixture(table);
    EXPECT_EQ(f.method, DensityMethod::PoissonPolynomial);
    double sup = 0;
    for (double z = -3; z <= 3; z += 0.01) sup = std::max(sup, std::abs(f.density(z) - phi(z)));
    EXPECT_LT(sup, 0.02);
}

TEST(FitMixture, GridDensityIntegratesToOne) {
    const auto f = fit_mixture(sample_table(2, 5000, 0.05));
    double mass = 0;
    for (double d : f.grid_density()) {
        EXPECT_GE(d, 0.0);
        mass += d * f.width;
    }
    EXPECT_NEAR(mass, 1.0, 0.01);
}

TEST(FitMixture, TwoPointMassFallsBackToKernel) {
    std::vector<std::string> ids;
    std::vector<double> z;
    for (int i = 0; i < 40; ++i) {
        ids.push_back("h");
        z.push_back(i % 2 ? 1.0 : -1.0);
    }
    const auto f = fit_mixture(identity_ztable(ids, z));
    EXPECT_EQ(f.method, DensityMethod::Kernel);
    EXPECT_FALSE(f.warnings.empty());
    EXPECT_GT(f.bandwidth, 0.0);
}

TEST(FitMixture, Errors) {
    EXPECT_THROW(fit_mixture(identity_ztable({"a", "b"}, {0.0, 1.0})), NumericalError);
    EXPECT_THROW(fit_mixture(identity_ztable(std::vector<std::string>(30, "h"), std::vector<double>(30, 2.0))),
                 NumericalError);
}

TEST(FitMixture, RightShoulderOfMixture) {
    const auto f = fit_mixture(sample_table(3, 10000, 0.05, 3.0));
    EXPECT_GT(f.density(3.0), phi(3.0));
}

TEST(EmpiricalNull, StandardNormal) {
    const auto table = sample_table(4, 10000);
    const auto null = fit_empirical_null(table, fit_mixture(table));
    EXPECT_EQ(null.source, NullSource::Empirical);
    EXPECT_NEAR(null.delta, 0.0, 0.05);
    EXPECT_NEAR(null.sigma, 1.0, 0.05);
    EXPECT_FALSE(null.unreliable);
}

TEST(EmpiricalNull, ShiftedNull) {
    const auto table = sample_table(5, 10000, 0.0, 0.0, 1.0, 0.3);
    const auto null = fit_empirical_null(table, fit_mixture(table));
    EXPECT_NEAR(null.delta, 0.3, 0.05);
    EXPECT_NEAR(null.sigma, 1.0, 0.05);
}

TEST(EmpiricalNull, WideNullIsRecoveredOnAverage) {
    // The matching window stays at +-1.5, under one sd here, so single fits
    // are noisy; the average over replicates is checked.
    double sum = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> z(0.0, 1.6);
        std::vector<double> v(10000);
        for (auto& x : v) x = z(rng);
        const auto table = identity_ztable(std::vector<std::string>(v.size(), "h"), v);
        sum += fit_empirical_null(table, fit_mixture(table)).sigma;
    }
    EXPECT_NEAR(sum / 10.0, 1.6, 0.08);
}

TEST(EmpiricalNull, TheoreticalModeIgnoresData) {
    const auto table = sample_table(7, 2000, 0.0, 0.0, 1.0, 0.8);
    const auto null = fit_empirical_null(table, fit_mixture(table), {NullMode::Theoretical});
    EXPECT_EQ(null.source, NullSource::Theoretical);
    EXPECT_EQ(null.delta, 0.0);
    EXPECT_EQ(null.sigma, 1.0);
    EXPECT_FALSE(null.fell_back);
}

TEST(EmpiricalNull, NonNullFractionGuard) {
    const auto table = sample_table(8, 10000, 0.25, 3.5);
    const auto null = fit_empirical_null(table, fit_mixture(table));
    EXPECT_TRUE(null.unreliable);
    ASSERT_FALSE(null.warnings.empty());
    EXPECT_NE(null.warnings.back().find("unreliable"), std::string::npos);
}

TEST(EmpiricalNull, SmallNonNullFractionIsNotFlagged) {
    const auto table = sample_table(9, 10000, 0.03, 4.0);
    EXPECT_FALSE(fit_empirical_null(table, fit_mixture(table)).unreliable);
}

TEST(LocalFdr, IdenticalDensitiesGiveOne) {
    const auto table = identity_ztable({"a", "b", "c"}, {-2.0, 0.0, 3.0});
    NullFit null;  // N(0,1)
    const auto r = local_fdr(table, kernel_at({0.0}, 1.0), null);
    for (const auto& e : r.entries) {
        EXPECT_NEAR(e.fdr, 1.0, 1e-12);
        EXPECT_FALSE(e.significant);
    }
}

TEST(LocalFdr, RatioAboveOneIsClipped) {
    const auto table = identity_ztable({"a"}, {0.0});
    NullFit null;
    const auto r = local_fdr(table, kernel_at({3.0}, 1.0), null);
    EXPECT_EQ(r.entries[0].raw_fdr, 1.0);
    EXPECT_EQ(r.entries[0].fdr, 1.0);
}

TEST(LocalFdr, ZeroDensityAtObservedValueIsAnError) {
    const auto table = identity_ztable({"a"}, {40.0});
    EXPECT_THROW(local_fdr(table, kernel_at({0.0}, 0.1), NullFit{}), NumericalError);
}

TEST(LocalFdr, TracksAnalyticMixtureFdr) {
    // 0.9 N(0,1) + 0.1 N(4, 0.5^2): analytic fdr(z) = phi(z) / f(z), which
    // crosses 0.01 near z = 3.62 (fdr(3.5) is about 0.018). A degree-7 log
    // polynomial smears the narrow bump over 2.5 < z < 3.5, so agreement is
    // checked where the fit follows the bump.
    const auto table = sample_table(10, 10000, 0.1, 4.0, 0.5);
    const auto r = run_fdr(table, {}, {NullMode::Theoretical});
    auto analytic = [](double z) { return std::min(1.0, phi(z) / (0.9 * phi(z) + 0.1 * phi(z, 4.0, 0.5))); };
    EXPECT_NEAR(analytic(3.5), 0.0177, 5e-4);
    EXPECT_GT(analytic(3.6), 0.01);
    EXPECT_LT(analytic(3.65), 0.01);
    for (const auto& e : r.entries) {
        if (e.z > 3.8) {
            EXPECT_TRUE(e.significant) << e.z << " fdr " << e.fdr;
        }
        if (std::abs(e.z) < 1.0) {
            EXPECT_GT(e.fdr, 0.5) << e.z;
        }
        if (e.z >= 3.5 && e.z <= 5.0) {
            EXPECT_NEAR(e.fdr, analytic(e.z), 0.02) << e.z;
        }
    }
}

TEST(LocalFdr, UpperBoundsPosteriorNullProbability) {
    // Exact mixture 0.95 N(0,1) + 0.05 N(3,1) as a kernel density: 19 points
    // at 0 and one at 3 with unit bandwidth.
    std::vector<double> points(19, 0.0);
    points.push_back(3.0);
    const double p0 = 0.95;
    std::vector<std::string> ids;
    std::vector<double> z;
    for (double v = -4.0; v <= 7.0; v += 0.05) {
        ids.push_back("h");
        z.push_back(v);
    }
    const auto r = local_fdr(identity_ztable(ids, z), kernel_at(points, 1.0), NullFit{});
    for (const auto& e : r.entries) {
        const double f = p0 * phi(e.z) + (1 - p0) * phi(e.z, 3.0);
        EXPECT_NEAR(e.raw_fdr, std::min(1.0, phi(e.z) / f), 1e-12);
        EXPECT_GE(e.fdr, p0 * phi(e.z) / f - 1e-12) << e.z;
    }
}

TEST(LocalFdr, MonotoneTails) {
    const auto table = sample_table(12, 3000, 0.08, 3.0);
    const auto r = run_fdr(table);
    const double center = r.null.delta;
    for (const auto& a : r.entries) {
        if (!a.significant) continue;
        for (const auto& b : r.entries) {
            const bool same_upper = a.z >= center && b.z >= a.z;
            const bool same_lower = a.z < center && b.z <= a.z;
            if (same_upper || same_lower) {
                EXPECT_TRUE(b.significant) << a.z << " vs " << b.z;
            }
        }
    }
}

TEST(LocalFdr, LabelsFollowThreshold) {
    const auto table = sample_table(13, 4000, 0.05, 3.5);
    const auto r = run_fdr(table, {}, {}, {0.2, true});
    for (const auto& e : r.entries) {
        EXPECT_EQ(e.significant, e.fdr < 0.2);
        EXPECT_GE(e.fdr, 0.0);
        EXPECT_LE(e.fdr, 1.0);
    }
}

TEST(LocalFdr, PureNullCalibration) {
    std::size_t flagged = 0, total = 0;
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
        const auto r = run_fdr(sample_table(seed, 10000));
        flagged += r.significant_count();
        total += r.entries.size();
    }
    EXPECT_LE(static_cast<double>(flagged) / static_cast<double>(total), 0.002);
}

TEST(ThresholdFromFdr, SmallestAbsoluteSignificantScore) {
    FdrReport r;
    EXPECT_FALSE(threshold_from_fdr(r).has_value());
    r.entries.push_back({"a", 0.31, 3.0, 0.0, 0.0, true});
    EXPECT_DOUBLE_EQ(*threshold_from_fdr(r), 0.31);
    r.entries.push_back({"b", -0.45, -4.0, 0.0, 0.0, true});
    r.entries.push_back({"c", 0.05, 0.1, 1.0, 1.0, false});
    EXPECT_DOUBLE_EQ(*threshold_from_fdr(r), 0.31);
    for (auto& e : r.entries) e.significant = false;
    EXPECT_FALSE(threshold_from_fdr(r).has_value());
}

TEST(ManualCutoffs, ReplaceLabels) {
    FdrReport r;
    r.entries = {{"a", 0.31, 3.1, 1.0, 1.0, false}, {"b", -0.05, -2.9, 0.0, 0.0, true}};
    apply_manual_z(r, 3.0);
    EXPECT_TRUE(r.entries[0].significant);
    EXPECT_FALSE(r.entries[1].significant);
    apply_manual_epsilon(r, 0.05);
    EXPECT_TRUE(r.entries[0].significant);
    EXPECT_TRUE(r.entries[1].significant);
}

TEST(BenjaminiHochberg, StepUp) {
    // m = 5, q = 0.05: thresholds 0.01, 0.02, 0.03, 0.04, 0.05. Sorted p: 0.005, 0.011, 0.02, 0.041, 0.9.
    // Largest k with p_(k) <= k q / m is k = 3 (0.02 <= 0.03); 0.011 > 0.01 is still rejected.
    const auto r = benjamini_hochberg({0.9, 0.02, 0.005, 0.041, 0.011}, 0.05);
    EXPECT_EQ(r, (std::vector<bool>{false, true, true, false, true}));
    EXPECT_EQ(benjamini_hochberg({}, 0.05), std::vector<bool>{});
}

TEST(PToZ, InverseNormalOfComplement) {
    EXPECT_NEAR(p_to_z(0.5), 0.0, 1e-12);
    EXPECT_NEAR(p_to_z(0.025), 1.959963984540054, 1e-9);
    EXPECT_TRUE(std::isfinite(p_to_z(0.0)));
    EXPECT_TRUE(std::isfinite(p_to_z(1.0)));
    EXPECT_GT(p_to_z(0.0), 8.0);
}

TEST(FdrExport, CsvAndHistogram) {
    const auto table = sample_table(14, 500, 0.05, 3.0);
    const auto r = run_fdr(table);
    std::ostringstream a, b;
    write_fdr_csv(a, r);
    write_fdr_histogram_csv(b, r);
    const auto fdr_text = a.str(), hist_text = b.str();
    EXPECT_EQ(fdr_text.substr(0, fdr_text.find('\n')), "hypothesis,epsilon_avg,z,fdr,label");
    EXPECT_EQ(hist_text.substr(0, hist_text.find('\n')), "z,count,f,f0,f_count,f0_count");
    EXPECT_EQ(std::count(hist_text.begin(), hist_text.end(), '\n'), 121);
}

TEST(Skewness, SignOfAsymmetry) {
    EXPECT_GT(skewness({0, 0, 0, 0, 10}), 0.0);
    EXPECT_LT(skewness({0, 0, 0, 0, -10}), 0.0);
    EXPECT_EQ(skewness({1, 1, 1}), 0.0);
}
