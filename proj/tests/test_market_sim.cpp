#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "tlcause/market_sim.hpp"

using namespace tlcause;

namespace {

SimSpec spec_for(Scenario s, std::uint64_t seed, std::size_t portfolios = 25, std::size_t days = 3001) {
    SimSpec spec;
    spec.scenario = s;
    spec.seed = seed;
    spec.n_portfolios = portfolios;
    spec.n_days = days;
    return spec;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean(a), mb = mean(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

double sd(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST(Scenario, ParseAndFlags) {
    EXPECT_EQ(parse_scenario("A"), Scenario::A);
    EXPECT_EQ(parse_scenario("f"), Scenario::F);
    EXPECT_THROW(parse_scenario("G"), DataError);
    EXPECT_THROW(parse_scenario(""), DataError);
    EXPECT_EQ(scenario_letter(Scenario::D), 'D');
    EXPECT_TRUE(has_one_lag(Scenario::E));
    EXPECT_FALSE(has_one_lag(Scenario::C));
    EXPECT_TRUE(has_random_lag(Scenario::F));
    EXPECT_TRUE(has_dependencies(Scenario::D));
    EXPECT_FALSE(has_dependencies(Scenario::B));
}

TEST(PortfolioNames, ZeroPadded) {
    EXPECT_EQ(portfolio_names(3), (std::vector<std::string>{"P01", "P02", "P03"}));
    EXPECT_EQ(portfolio_names(120).back(), "P120");
}

TEST(MarketSim, ScenarioAHasNoRelations) {
    const auto sim = simulate(spec_for(Scenario::A, 1));
    EXPECT_EQ(sim.returns.size(), 25u);
    EXPECT_EQ(sim.days(), 3001u);
    EXPECT_TRUE(sim.ground_truth().relations.empty());
    EXPECT_TRUE(sim.ground_truth().alternates.empty());
    for (const auto& row : sim.structure.lags) {
        for (auto l : row) EXPECT_EQ(l, 3u);
    }
}

TEST(MarketSim, ZeroBetasWithDependencies) {
    auto spec = spec_for(Scenario::D, 2);
    spec.betas.assign(3, {0.0, 0.0});
    const auto sim = simulate(spec);
    const auto& truth = sim.ground_truth().relations;
    ASSERT_EQ(truth.size(), 3u);
    std::set<std::string> sources, targets;
    for (const auto& r : truth) {
        EXPECT_EQ(r.delta, 1u);
        EXPECT_EQ(r.kind, RelationKind::Dependency);
        EXPECT_EQ(r.sign, 1);
        sources.insert(r.source);
        targets.insert(r.target);
    }
    EXPECT_EQ(sources.size(), 3u);
    EXPECT_EQ(targets.size(), 3u);
    for (const auto& s : sources) EXPECT_EQ(targets.count(s), 0u);
}

TEST(MarketSim, ScenarioBWithFourPortfolios) {
    const auto sim = simulate(spec_for(Scenario::B, 3, 4, 200));
    const auto& truth = sim.ground_truth().relations;
    ASSERT_EQ(truth.size(), 4u);
    std::size_t shifted = 0;
    for (bool s : sim.structure.shifted) shifted += s;
    EXPECT_EQ(shifted, 2u);
    for (const auto& r : truth) {
        EXPECT_EQ(r.delta, 2u);
        EXPECT_EQ(r.kind, RelationKind::FactorProxy);
        const auto src = std::stoul(r.source.substr(1)) - 1, dst = std::stoul(r.target.substr(1)) - 1;
        EXPECT_TRUE(sim.structure.shifted[src]);
        EXPECT_FALSE(sim.structure.shifted[dst]);
    }
}

TEST(MarketSim, HalfTheUniverseOnTheAlternateLag) {
    for (auto s : {Scenario::B, Scenario::E}) {
        const auto st = draw_structure(spec_for(s, 4));
        std::size_t shifted = 0;
        for (std::size_t i = 0; i < 25; ++i) {
            shifted += st.shifted[i];
            for (auto l : st.lags[i]) EXPECT_EQ(l, st.shifted[i] ? 1u : 3u);
        }
        EXPECT_EQ(shifted, 12u);
    }
}

TEST(MarketSim, RandomLagsStayInRange) {
    for (auto s : {Scenario::C, Scenario::F}) {
        const auto st = draw_structure(spec_for(s, 5));
        for (std::size_t i = 0; i < 25; ++i) {
            for (auto l : st.lags[i]) {
                if (st.shifted[i]) {
                    EXPECT_LE(l, 3u);
                } else {
                    EXPECT_EQ(l, 3u);
                }
            }
        }
    }
}

TEST(MarketSim, ReturnsReconstructFromComponents) {
    const auto sim = simulate(spec_for(Scenario::F, 6, 10, 500));
    const auto& st = sim.structure;
    double worst = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t t = 0; t < 500; ++t) {
            double r = sim.base_errors[i][t + 1];
            for (const auto& [src, dst] : st.dependencies) {
                if (dst == i) r += sim.base_errors[src][t];
            }
            for (std::size_t j = 0; j < 3; ++j) {
                r += st.betas[i][j] * sim.factor(j, static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(st.lags[i][j]));
            }
            worst = std::max(worst, std::abs(r - sim.returns[i][t]));
        }
    }
    EXPECT_LE(worst, 1e-12);
}

TEST(MarketSim, TwoPeriodsShareStructure) {
    const auto [p1, p2] = two_periods(spec_for(Scenario::E, 7, 10, 300));
    EXPECT_EQ(p1.ground_truth(), p2.ground_truth());
    EXPECT_EQ(p1.structure.betas, p2.structure.betas);
    EXPECT_NE(p1.returns, p2.returns);
    EXPECT_EQ(p2.period, 1u);
}

TEST(MarketSim, Deterministic) {
    const auto a = simulate(spec_for(Scenario::F, 8, 10, 300));
    const auto b = simulate(spec_for(Scenario::F, 8, 10, 300));
    const auto c = simulate(spec_for(Scenario::F, 9, 10, 300));
    EXPECT_EQ(a.returns, b.returns);
    EXPECT_EQ(a.ground_truth(), b.ground_truth());
    EXPECT_NE(a.returns, c.returns);
}

TEST(MarketSim, FactorAndResidualMoments) {
    auto spec = spec_for(Scenario::A, 10, 25, 20000);
    const auto sim = simulate(spec);
    EXPECT_NEAR(sd(sim.factors[0]), 1.0, 0.03);
    EXPECT_NEAR(sd(sim.factors[1]), 0.5, 0.015);
    EXPECT_NEAR(correlation(sim.factors[0], sim.factors[2]), 0.1, 0.03);
    EXPECT_NEAR(sd(sim.errors[3]), 0.5, 0.015);
    EXPECT_NEAR(correlation(sim.errors[3], sim.errors[7]), 0.1, 0.03);
    const auto& b = sim.structure.betas;
    double market = 0;
    for (const auto& row : b) market += row[0];
    EXPECT_NEAR(market / 25.0, 1.0, 0.15);
}

TEST(MarketSim, ExternalFactorData) {
    auto spec = spec_for(Scenario::B, 11, 4, 20);
    spec.factor_data.assign(3, std::vector<double>(46));
    for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t r = 0; r < 46; ++r) spec.factor_data[j][r] = static_cast<double>(100 * j + r);
    }
    const auto [p1, p2] = two_periods(spec);
    EXPECT_EQ(p1.factor(1, -3), 100.0);
    EXPECT_EQ(p2.factor(1, -3), 123.0);
    spec.factor_data[0].resize(45);
    for (auto& row : spec.factor_data) row.resize(45);
    EXPECT_THROW(two_periods(spec), DataError);
}

TEST(MarketSim, SpecValidation) {
    auto bad = [](auto edit) {
        auto s = spec_for(Scenario::D, 1, 10, 100);
        edit(s);
        return s;
    };
    EXPECT_THROW(simulate(bad([](SimSpec& s) { s.n_portfolios = 1; })), DataError);
    EXPECT_THROW(simulate(bad([](SimSpec& s) { s.n_dependencies = 6; })), DataError);
    EXPECT_THROW(simulate(bad([](SimSpec& s) { s.alt_lag = 4; })), DataError);
    EXPECT_THROW(simulate(bad([](SimSpec& s) { s.n_days = 4; })), DataError);
    EXPECT_THROW(simulate(bad([](SimSpec& s) { s.residual_corr = 1.0; })), DataError);
    EXPECT_THROW(simulate(bad([](SimSpec& s) { s.factor_corr = -0.6; })), DataError);
    EXPECT_THROW(simulate(bad([](SimSpec& s) { s.betas.assign(2, {}); })), DataError);
    EXPECT_NO_THROW(simulate(bad([](SimSpec&) {})));
}

TEST(GroundTruth, CanonicalIsSmallestPositiveDelta) {
    const std::vector<std::string> names{"P1", "P2"};
    const std::vector<std::vector<double>> betas{{1.0, 1.0}, {1.0, -2.0}};
    const std::vector<std::vector<std::size_t>> lags{{0, 1}, {3, 3}};
    const auto gt = derive_ground_truth(names, betas, lags, {}, {});
    ASSERT_EQ(gt.relations.size(), 1u);
    EXPECT_EQ(gt.relations[0].delta, 2u);
    EXPECT_EQ(gt.relations[0].sign, -1);
    ASSERT_EQ(gt.alternates.size(), 1u);
    EXPECT_EQ(gt.alternates[0].delta, 3u);
    EXPECT_EQ(gt.alternates[0].sign, 1);
}

TEST(GroundTruth, SignWeighsFactorVolatility) {
    const std::vector<std::string> names{"P1", "P2"};
    const std::vector<std::vector<double>> betas{{1.0, 1.0}, {1.0, -1.5}};
    const std::vector<std::vector<std::size_t>> lags{{1, 1}, {3, 3}};
    EXPECT_EQ(derive_ground_truth(names, betas, lags, {}, {{0, 1.0}, {0, 0.5}}).relations[0].sign, 1);
    EXPECT_EQ(derive_ground_truth(names, betas, lags, {}, {{0, 1.0}, {0, 1.0}}).relations[0].sign, -1);
}

TEST(Residualize, OrthogonalToSameDayFactors) {
    const auto sim = simulate(spec_for(Scenario::B, 12, 6, 800));
    const auto res = residualize(sim);
    ASSERT_EQ(res.size(), 6u);
    for (const auto& r : res) {
        ASSERT_EQ(r.size(), 800u);
        EXPECT_NEAR(mean(r), 0.0, 1e-10);
        for (std::size_t j = 0; j < 3; ++j) {
            double dot = 0;
            for (std::size_t t = 0; t < 800; ++t) dot += r[t] * sim.factor(j, static_cast<std::ptrdiff_t>(t));
            EXPECT_NEAR(dot, 0.0, 1e-8);
        }
    }
}

TEST(Residualize, RemovesSameDayFactorExposure) {
    auto spec = spec_for(Scenario::A, 13, 4, 2000);
    spec.base_lag = 0;
    spec.alt_lag = 0;
    spec.random_lag_hi = 0;
    const auto sim = simulate(spec);
    const auto res = residualize(sim);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_GT(correlation(res[i], sim.errors[i]), 0.99);
}
