#include <gtest/gtest.h>

#include "oracle.hpp"

using namespace tlcause;
namespace mk = tlcause::make;

TEST(Properties, PrintParseRoundTrip) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        const auto f = oracle::random_formula(rng, 1 + i % 6, 4);
        const auto text = print(f);
        EXPECT_EQ(parse(text), f) << text;
        EXPECT_EQ(print(parse(text)), text);
    }
}

TEST(Properties, SatMatchesBruteForce) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 400; ++i) {
        const std::size_t len = oracle::uniform(rng, 1, 50), atoms = oracle::uniform(rng, 1, 4);
        const auto trace = oracle::random_trace(rng, len, atoms, 0.2 + 0.6 * static_cast<double>(i % 5) / 4.0);
        const auto f = oracle::random_state_formula(rng, 3, atoms);
        const auto cols = oracle::columns_of(trace);
        EXPECT_EQ(oracle::to_bools(sat_bits(trace, f)), oracle::sat(cols, len, f)) << print(f);
    }
}

TEST(Properties, LeadsToMatchesBruteForce) {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 400; ++i) {
        const std::size_t len = oracle::uniform(rng, 1, 50), atoms = oracle::uniform(rng, 1, 4);
        const auto trace = oracle::random_trace(rng, len, atoms);
        const auto c = oracle::random_state_formula(rng, 2, atoms);
        const auto e = oracle::random_state_formula(rng, 2, atoms);
        const auto w = oracle::random_window(rng, 1, 5);
        const auto got = estimate_leadsto(trace, c, e, w);
        const auto want = oracle::leadsto(oracle::columns_of(trace), len, c, e, w);
        EXPECT_EQ(got.numerator, want.num);
        EXPECT_EQ(got.denominator, want.den);
    }
}

TEST(Properties, DeMorgan) {
    std::mt19937_64 rng(14);
    for (int i = 0; i < 200; ++i) {
        const auto trace = oracle::random_trace(rng, 40, 3);
        const auto a = oracle::random_state_formula(rng, 2, 3), b = oracle::random_state_formula(rng, 2, 3);
        EXPECT_EQ(sat_bits(trace, mk::negate(mk::conj(a, b))),
                  sat_bits(trace, mk::disj(mk::negate(a), mk::negate(b))));
        EXPECT_EQ(sat_bits(trace, mk::negate(mk::disj(a, b))),
                  sat_bits(trace, mk::conj(mk::negate(a), mk::negate(b))));
        EXPECT_EQ(sat_bits(trace, mk::negate(mk::negate(a))), sat_bits(trace, a));
    }
}

TEST(Properties, LeadsToGrowsWithWindowEnd) {
    std::mt19937_64 rng(15);
    for (int i = 0; i < 200; ++i) {
        const auto trace = oracle::random_trace(rng, 50, 2, 0.3);
        const auto c = mk::atom("a"), e = mk::atom("b");
        const std::size_t lo = oracle::uniform(rng, 1, 4);
        ProbEstimate prev = estimate_leadsto(trace, c, e, {lo, lo});
        for (std::size_t hi = lo + 1; hi <= lo + 6; ++hi) {
            const auto cur = estimate_leadsto(trace, c, e, {lo, hi});
            EXPECT_EQ(cur.denominator, prev.denominator);
            EXPECT_GE(cur.numerator, prev.numerator);
            prev = cur;
        }
        EXPECT_GE(estimate_leadsto(trace, c, e, WindowBound::unbounded(lo)).numerator, prev.numerator);
    }
}

TEST(Properties, EstimatesAreProbabilities) {
    std::mt19937_64 rng(16);
    for (int i = 0; i < 200; ++i) {
        const auto trace = oracle::random_trace(rng, oracle::uniform(rng, 1, 60), 3);
        const auto f = oracle::random_state_formula(rng, 3, 3);
        const auto p = estimate_prob(trace, f);
        EXPECT_LE(p.numerator, p.denominator);
        const auto w = oracle::random_window(rng, 1, 4);
        const auto l = estimate_leadsto(trace, f, mk::atom("a"), w);
        EXPECT_LE(l.numerator, l.denominator);
        EXPECT_LE(l.denominator, sat_bits(trace, f).count());
        if (auto v = l.value()) {
            EXPECT_GE(*v, 0.0);
            EXPECT_LE(*v, 1.0);
        }
    }
}

TEST(Properties, EpsilonMatchesBruteForce) {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 300; ++i) {
        const std::size_t len = oracle::uniform(rng, 5, 60);
        const auto trace = oracle::random_trace(rng, len, 4);
        const auto e = oracle::random_state_formula(rng, 1, 4);
        const auto w = oracle::random_window(rng, 1, 3);
        const Hypothesis c{oracle::random_state_formula(rng, 2, 4), e, w, std::nullopt};
        const Hypothesis x{oracle::random_state_formula(rng, 2, 4), e, w, std::nullopt};
        const std::size_t support = oracle::uniform(rng, 0, 4);
        const auto got = epsilon_x(trace, c, x, {support});
        const auto want = oracle::epsilon_x(oracle::columns_of(trace), len, c, x.cause, support);
        ASSERT_EQ(got.has_value(), want.has_value()) << print(c.cause) << " / " << print(x.cause);
        if (got) {
            EXPECT_NEAR(*got, *want, 1e-12);
        }
    }
}

TEST(Properties, EpsilonIsAntisymmetricUnderCauseNegation) {
    // Swapping the roles of c and !c flips the sign of the difference.
    std::mt19937_64 rng(18);
    for (int i = 0; i < 200; ++i) {
        const auto trace = oracle::random_trace(rng, 60, 3);
        const auto w = oracle::random_window(rng, 1, 2);
        const Hypothesis c{mk::atom("a"), mk::atom("c"), w, std::nullopt};
        const Hypothesis nc{mk::negate(mk::atom("a")), mk::atom("c"), w, std::nullopt};
        const Hypothesis x{mk::atom("b"), mk::atom("c"), w, std::nullopt};
        const auto p = epsilon_x(trace, c, x, {1}), q = epsilon_x(trace, nc, x, {1});
        ASSERT_EQ(p.has_value(), q.has_value());
        if (p) {
            EXPECT_NEAR(*p, -*q, 1e-12);
        }
    }
}
