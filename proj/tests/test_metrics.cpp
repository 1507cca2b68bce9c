#include <gtest/gtest.h>

#include <random>

#include "mtgp/metrics.hpp"

using namespace mtgp;

TEST(Pehe, HandComputed) {
    Eigen::VectorXd p(3), t(3);
    p << 1.0, 2.0, 3.0;
    t << 1.5, 2.0, 1.0;
    EXPECT_DOUBLE_EQ(pehe(p, t), (0.25 + 0.0 + 4.0) / 3.0);
    EXPECT_DOUBLE_EQ(sqrt_pehe(p, t), std::sqrt(4.25 / 3.0));
    EXPECT_EQ(pehe(t, t), 0.0);
}

TEST(Pehe, ShapeErrors) {
    EXPECT_THROW(pehe(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)), ShapeError);
    EXPECT_THROW(pehe(Eigen::VectorXd(), Eigen::VectorXd()), ShapeError);
}

TEST(KlRisk, ReducesToScaledPehe) {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.01, 3.0);
    for (int rep = 0; rep < 100; ++rep) {
        const Index m = 1 + rep % 17;
        PosteriorSummary post;
        post.ite_mean.resize(m);
        Eigen::VectorXd truth(m);
        double sq = 0.0;
        for (Index i = 0; i < m; ++i) {
            post.ite_mean(i) = g(rng);
            truth(i) = g(rng);
            sq += (post.ite_mean(i) - truth(i)) * (post.ite_mean(i) - truth(i));
        }
        const double s0 = u(rng), s1 = u(rng);
        const double expected = (sq / static_cast<double>(m)) / (2.0 * (s0 + s1));
        EXPECT_NEAR(expected_kl_risk(post, truth, s0, s1), expected, 1e-12 * std::max(1.0, expected));
    }
    PosteriorSummary post;
    post.ite_mean = Eigen::VectorXd::Zero(2);
    EXPECT_THROW(expected_kl_risk(post, Eigen::VectorXd::Zero(2), 0.0, 1.0), ConfigError);
}

TEST(RateOracle, KnownValues) {
    EXPECT_DOUBLE_EQ(optimal_rate_oracle(0.5, 0.5, 1, 1), -0.5);
    EXPECT_DOUBLE_EQ(optimal_rate_oracle(2.5, 2.5, 1, 1), -5.0 / 6.0);
    EXPECT_DOUBLE_EQ(optimal_rate_oracle(0.5, 2.5, 1, 1), -0.5);
    EXPECT_DOUBLE_EQ(optimal_rate_oracle(2.5, 0.5, 1, 1), -0.5);
    EXPECT_DOUBLE_EQ(optimal_rate_oracle(1.0, 1.0, 2, 2), -0.5);
    EXPECT_DOUBLE_EQ(optimal_rate_oracle(1.5, 1.5, 3, 3), -0.5);
    EXPECT_DOUBLE_EQ(optimal_rate_oracle(2.0, 1.0, 1, 4), -1.0 / 3.0);
    EXPECT_THROW(optimal_rate_oracle(0.0, 1.0, 1, 1), ConfigError);
    EXPECT_THROW(optimal_rate_oracle(1.0, 1.0, 1, -1), ConfigError);
}

TEST(RateOracle, SlowerArmDominates) {
    for (double a0 : {0.5, 1.5, 2.5})
        for (double a1 : {0.5, 1.5, 2.5})
            for (double p : {1.0, 2.0, 5.0}) {
                const double r0 = -2 * a0 / (2 * a0 + p), r1 = -2 * a1 / (2 * a1 + p);
                EXPECT_DOUBLE_EQ(optimal_rate_oracle(a0, a1, p, p), r0 > r1 ? r0 : r1);
            }
}

TEST(LogLog, ExactPowerLaw) {
    const std::vector<double> x{50, 100, 200, 400};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * std::pow(v, -0.75));
    const LogLogFit f = fit_loglog(x, y);
    EXPECT_NEAR(f.slope, -0.75, 1e-12);
    EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
    EXPECT_NEAR(f.slope_se, 0.0, 1e-10);
    EXPECT_TRUE(std::isnan(fit_loglog({1, 2}, {1, 2}).slope_se));
    EXPECT_THROW(fit_loglog({1, 2}, {1, 0}), NumericalError);
    EXPECT_THROW(fit_loglog({2, 2}, {1, 3}), NumericalError);
    EXPECT_THROW(fit_loglog({1}, {1}), ConfigError);
}

TEST(LogLog, SlopeStandardError) {
    const std::vector<double> x{1, std::exp(1.0), std::exp(2.0)};
    const std::vector<double> y{1, std::exp(1.0), std::exp(3.0)};
    const LogLogFit f = fit_loglog(x, y);
    EXPECT_NEAR(f.slope, 1.5, 1e-12);
    // residuals (1/6, -1/3, 1/6): rss = 1/6, sxx = 2
    EXPECT_NEAR(f.slope_se, std::sqrt((1.0 / 6.0) / 1.0 / 2.0), 1e-12);
}

TEST(Quantiles, RType7) {
    const std::vector<double> v{10, 1, 4, 3, 2};
    EXPECT_DOUBLE_EQ(quantile(v, 0.25), 2.0);
    EXPECT_DOUBLE_EQ(quantile(v, 0.75), 4.0);
    EXPECT_DOUBLE_EQ(median(v), 3.0);
    EXPECT_DOUBLE_EQ(median({1, 2, 3, 4}), 2.5);
    EXPECT_NEAR(quantile({1, 2, 3, 4}, 0.1), 1.3, 1e-14);
    EXPECT_DOUBLE_EQ(quantile({7}, 0.9), 7.0);
    EXPECT_THROW(median({}), ConfigError);
}

TEST(MeanIntervalTest, NormalApproximation) {
    const MeanInterval m = mean_interval({1, 2, 3, 4});
    EXPECT_DOUBLE_EQ(m.mean, 2.5);
    EXPECT_NEAR(m.sd, std::sqrt(5.0 / 3.0), 1e-14);
    ASSERT_TRUE(m.lower && m.upper);
    EXPECT_NEAR(*m.upper - m.mean, 1.96 * std::sqrt(5.0 / 3.0) / 2.0, 1e-14);
    EXPECT_EQ(m.count, 4u);
    const MeanInterval one = mean_interval({3});
    EXPECT_DOUBLE_EQ(one.mean, 3.0);
    EXPECT_FALSE(one.lower.has_value());
    EXPECT_TRUE(std::isnan(mean_interval({}).mean));
}
