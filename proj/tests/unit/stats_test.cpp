#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ean/evaluator.hpp"
#include "ean/search.hpp"
#include "ean/stats.hpp"

using namespace ean;

TEST(ConnectionScore, Examples) {
    EXPECT_EQ(connection_score({ConnectionScheme::ones(5)}), std::vector<double>(5, 1.0));
    EXPECT_EQ(connection_score({ConnectionScheme::from_string("10"), ConnectionScheme::from_string("01")}),
              (std::vector<double>{0.5, 0.5}));
    EXPECT_THROW(connection_score({}), std::invalid_argument);
    EXPECT_THROW(connection_score({ConnectionScheme::ones(3), ConnectionScheme::ones(4)}), std::invalid_argument);
}

TEST(ConnectionScore, BernoulliBand) {
    std::mt19937_64 rng(1);
    std::vector<ConnectionScheme> set;
    for (int i = 0; i < 100; ++i) set.push_back(sample_bernoulli_scheme(0.5, 54, rng));
    for (double s : connection_score(set)) {
        EXPECT_GE(s, 0.35);
        EXPECT_LE(s, 0.65);
    }
}

TEST(ConnectionScore, UnionIsWeightedAverage) {
    std::mt19937_64 rng(2);
    std::vector<ConnectionScheme> a, b;
    for (int i = 0; i < 7; ++i) a.push_back(sample_bernoulli_scheme(0.3, 9, rng));
    for (int i = 0; i < 13; ++i) b.push_back(sample_bernoulli_scheme(0.8, 9, rng));
    std::vector<ConnectionScheme> u = a;
    u.insert(u.end(), b.begin(), b.end());
    const auto sa = connection_score(a), sb = connection_score(b), su = connection_score(u);
    for (std::size_t j = 0; j < 9; ++j) EXPECT_NEAR(su[j], (7 * sa[j] + 13 * sb[j]) / 20.0, 1e-15);
}

TEST(RegressionSlope, Examples) {
    EXPECT_EQ(regression_slope(std::vector<double>(6, 0.37)), 0.0);
    std::vector<double> line(8);
    for (std::size_t j = 0; j < 8; ++j) line[j] = double(j) / 8.0;
    EXPECT_NEAR(regression_slope(line), 1.0 / 8.0, 1e-15);
    EXPECT_THROW(regression_slope({1.0}), std::invalid_argument);
}

TEST(RegressionSlope, TranslationAndScale) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> s(11);
    for (double& v : s) v = u(rng);
    const double base = regression_slope(s);
    auto shifted = s, scaled = s;
    for (double& v : shifted) v += 4.25;
    for (double& v : scaled) v *= -3.0;
    EXPECT_NEAR(regression_slope(shifted), base, 1e-14);
    EXPECT_NEAR(regression_slope(scaled), -3.0 * base, 1e-14);
}

TEST(RegressionSlope, TicketSetOnSyntheticLandscapeIsFlat) {
    // tickets labelled exhaustively; no block position is systematically favoured
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SyntheticLandscape ev(8, seed);
        const double full = ev.accuracy(ConnectionScheme::ones(8));
        std::vector<ConnectionScheme> tickets;
        for (std::uint64_t x = 0; x < 256; ++x) {
            const auto a = ConnectionScheme::from_index(x, 8);
            if (classify_ticket(ev.accuracy(a), full, 0.0, a.ones_count(), 8).is_ticket) tickets.push_back(a);
        }
        ASSERT_FALSE(tickets.empty()) << seed;
        EXPECT_LT(std::abs(regression_slope(connection_score(tickets))), 0.02) << "seed " << seed;
    }
}

TEST(Pearson, Examples) {
    const std::vector<double> x{0.1, 0.4, 0.2, 0.9, 0.5};
    std::vector<double> y(x.size()), z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = 2 * x[i] + 1;
        z[i] = -x[i];
    }
    EXPECT_NEAR(pearson(x, y).r, 1.0, 1e-15);
    EXPECT_NEAR(pearson(x, z).r, -1.0, 1e-15);
    EXPECT_EQ(pearson(x, y).p_one_sided, 0.0);
    EXPECT_THROW(pearson(x, std::vector<double>(5, 1.0)), std::invalid_argument);
    EXPECT_THROW(pearson({1, 2}, {1, 2}), std::invalid_argument);
    EXPECT_THROW(pearson({1, 2, 3}, {1, 2}), std::invalid_argument);
}

TEST(Pearson, AffineInvarianceAndPValue) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> x(30), y(30);
    for (std::size_t i = 0; i < 30; ++i) {
        x[i] = n(rng);
        y[i] = 0.5 * x[i] + n(rng);
    }
    const auto base = pearson(x, y);
    auto xa = x, ya = y;
    for (double& v : xa) v = 3.0 * v - 2.0;
    for (double& v : ya) v = 0.1 * v + 7.0;
    const auto moved = pearson(xa, ya);
    EXPECT_NEAR(moved.r, base.r, 1e-12);
    EXPECT_NEAR(moved.p_one_sided, base.p_one_sided, 1e-10);
    EXPECT_GT(base.r, 0.0);
    // r -> -r mirrors the one-sided p-value
    auto yn = y;
    for (double& v : yn) v = -v;
    EXPECT_NEAR(pearson(x, yn).p_one_sided, 1.0 - base.p_one_sided, 1e-12);
}

TEST(Violin, Examples) {
    const auto one = aggregate_violin({{0.5, 0.7}});
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].max, 0.7);
    EXPECT_EQ(one[0].mean, 0.7);
    EXPECT_EQ(one[0].min, 0.7);
    const auto three = aggregate_violin({{0.25, 1.0}, {0.25, 2.0}, {0.25, 3.0}});
    ASSERT_EQ(three.size(), 1u);
    EXPECT_EQ(three[0].count, 3u);
    EXPECT_EQ(three[0].max, 3.0);
    EXPECT_EQ(three[0].mean, 2.0);
    EXPECT_EQ(three[0].min, 1.0);
}

TEST(Violin, EmptyGroupSkippedAndOrder) {
    const auto r = aggregate_violin({{0.75, 1.0}, {0.25, 2.0}}, {0.25, 0.5, 0.75});
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].ratio, 0.25);
    EXPECT_EQ(r[1].ratio, 0.75);
}

TEST(Violin, ExhaustiveGroupMaxima) {
    SyntheticLandscape ev(8, 5);
    std::vector<ViolinRow> rows;
    std::vector<double> brute(9, -1.0);
    for (std::uint64_t x = 0; x < 256; ++x) {
        const auto a = ConnectionScheme::from_index(x, 8);
        const double acc = ev.accuracy(a);
        rows.push_back({a.ones_count() / 8.0, acc});
        brute[a.ones_count()] = std::max(brute[a.ones_count()], acc);
    }
    const auto v = aggregate_violin(rows);
    ASSERT_EQ(v.size(), 9u);
    for (std::size_t k = 0; k <= 8; ++k) {
        EXPECT_EQ(v[k].ratio, k / 8.0);
        EXPECT_EQ(v[k].max, brute[k]);
        EXPECT_LE(v[k].min, v[k].mean);
        EXPECT_LE(v[k].mean, v[k].max);
    }
}
