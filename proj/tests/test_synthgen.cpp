#include <gtest/gtest.h>

#include <cmath>

#include "mtgp/synthgen.hpp"
#include "oracle.hpp"

using namespace mtgp;

namespace {

Eigen::MatrixXd points(std::initializer_list<double> xs) {
    Eigen::MatrixXd x(static_cast<Index>(xs.size()), 1);
    Index i = 0;
    for (double v : xs) x(i++, 0) = v;
    return x;
}

}  // namespace

// Sample covariance of many independent draws against the Matérn kernel.
class LatticeMoments : public ::testing::TestWithParam<double> {};

TEST_P(LatticeMoments, VarianceAndCorrelationMatchKernel) {
    const double nu = GetParam(), ell = 0.2, s2 = 2.0;
    const Eigen::MatrixXd x = points({0.1, 0.1 + ell, 0.6, 0.6 + ell});
    const int draws = 400;
    double var = 0.0, cov = 0.0;
    for (int r = 0; r < draws; ++r) {
        const Surface f = gp_draw_surface(nu, ell, s2, {0}, 0, derive_seed(77, {static_cast<std::uint64_t>(r)}));
        const Eigen::VectorXd v = f.evaluate(x);
        var += 0.25 * v.squaredNorm();
        cov += 0.5 * (v(0) * v(1) + v(2) * v(3));
    }
    var /= draws;
    cov /= draws;
    EXPECT_NEAR(var / s2, 1.0, 0.2);
    EXPECT_NEAR(cov / s2, oracle::matern(nu, 1.0), 0.12);
}

INSTANTIATE_TEST_SUITE_P(Smoothness, LatticeMoments, ::testing::Values(0.5, 1.5, 2.5));

TEST(Lattice, TwoDimensionalVariance) {
    const Eigen::MatrixXd x = (Eigen::MatrixXd(3, 2) << 0.2, 0.3, 0.5, 0.8, 0.9, 0.1).finished();
    double var = 0.0;
    const int draws = 100;
    for (int r = 0; r < draws; ++r)
        var += gp_draw_surface(1.5, 0.2, 1.0, {0, 1}, 128, static_cast<std::uint64_t>(r)).evaluate(x).squaredNorm() / 3.0;
    EXPECT_NEAR(var / draws, 1.0, 0.2);
}

TEST(Lattice, DeterministicInSeed) {
    const Eigen::MatrixXd x = points({0.0, 0.33, 0.5, 1.0});
    const auto a = gp_draw_surface(0.5, 0.25, 1.0, {0}, 0, 5).evaluate(x);
    const auto b = gp_draw_surface(0.5, 0.25, 1.0, {0}, 0, 5).evaluate(x);
    const auto c = gp_draw_surface(0.5, 0.25, 1.0, {0}, 0, 6).evaluate(x);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(Lattice, InterpolatesLatticeValues) {
    const Surface f = gp_draw_surface(2.5, 0.3, 1.0, {0}, 11, 3);
    const auto* lat = f.lattice();
    ASSERT_NE(lat, nullptr);
    ASSERT_EQ(lat->values.size(), 11u);
    for (int k = 0; k < 11; ++k) EXPECT_NEAR(f.evaluate(points({k / 10.0}))(0), lat->values[static_cast<std::size_t>(k)], 1e-12);
    EXPECT_NEAR(f.evaluate(points({0.05}))(0), 0.5 * (lat->values[0] + lat->values[1]), 1e-12);
}

TEST(Lattice, ZeroVarianceIsFlat) {
    EXPECT_EQ(gp_draw_surface(0.5, 0.3, 0.0, {0}, 0, 3).evaluate(points({0.1, 0.7})), Eigen::VectorXd::Zero(2));
}

TEST(Lattice, RejectsBadSettings) {
    EXPECT_THROW(gp_draw_surface(1.0, 0.3, 1.0, {0}, 0, 1), ConfigError);
    EXPECT_THROW(gp_draw_surface(0.5, -0.3, 1.0, {0}, 0, 1), ConfigError);
    EXPECT_THROW(gp_draw_surface(0.5, 0.3, 1.0, {0, 1}, 2000, 1), ConfigError);
    EXPECT_THROW(gp_draw_surface(0.5, 0.3, 1.0, {}, 0, 1), ConfigError);
}

TEST(Surfaces, ClosedFormEvaluation) {
    const Eigen::RowVector3d x(0.2, 0.5, 0.9);
    const Surface poly({0, 2}, PolynomialSpec{{1.0, 2.0, -1.0}});
    EXPECT_NEAR(poly(x), (1 + 0.4 - 0.04) + (1 + 1.8 - 0.81), 1e-14);
    const Surface lin({1, 2}, LinearSpec{{2.0, -1.0}, 0.5});
    EXPECT_NEAR(lin(x), 0.5 + 1.0 - 0.9, 1e-14);
    const Surface ex({0}, ExponentialSpec{{3.0}, {}, 1.0});
    EXPECT_NEAR(ex(x), 1.0 + std::exp(3.0 * 0.7), 1e-12);
}

TEST(Generator, IgnoresIrrelevantDims) {
    GeneratorConfig g;
    g.d = 3;
    g.relevant_dims0 = {1};
    g.relevant_dims1 = {0, 2};
    const SyntheticModel m(g);
    Eigen::MatrixXd a(1, 3), b(1, 3);
    a << 0.2, 0.4, 0.6;
    b << 0.9, 0.4, 0.1;
    EXPECT_EQ(m.surface(0).evaluate(a), m.surface(0).evaluate(b));
    b << 0.2, 0.9, 0.6;
    EXPECT_EQ(m.surface(1).evaluate(a), m.surface(1).evaluate(b));
}

TEST(Generator, OutcomesDecompose) {
    GeneratorConfig g;
    g.n = 4000;
    g.d = 2;
    g.noise0 = 0.04;
    g.noise1 = 0.25;
    g.seed = 9;
    const SyntheticModel m(g);
    const auto ds = m.sample(g.n, g.seed);
    const Eigen::VectorXd mu0 = m.surface(0).evaluate(ds.features()), mu1 = m.surface(1).evaluate(ds.features());
    EXPECT_LT((*ds.true_ite() - (mu1 - mu0)).cwiseAbs().maxCoeff(), 1e-12);
    double r0 = 0.0, r1 = 0.0;
    for (Index i = 0; i < g.n; ++i) {
        const double y0 = ds.treatments()(i) ? (*ds.counterfactuals())(i) : ds.outcomes()(i);
        const double y1 = ds.treatments()(i) ? ds.outcomes()(i) : (*ds.counterfactuals())(i);
        r0 += (y0 - mu0(i)) * (y0 - mu0(i));
        r1 += (y1 - mu1(i)) * (y1 - mu1(i));
    }
    EXPECT_NEAR(r0 / g.n, 0.04, 0.006);
    EXPECT_NEAR(r1 / g.n, 0.25, 0.03);
}

TEST(Generator, AssignmentSeedChangesOnlyAssignment) {
    GeneratorConfig g;
    g.n = 300;
    g.seed = 4;
    const SyntheticModel m(g);
    const auto a = m.sample(g.n, g.seed);
    const auto b = m.sample(g.n, g.seed, 12345);
    EXPECT_EQ(a.features(), b.features());
    EXPECT_EQ(*a.true_ite(), *b.true_ite());
    EXPECT_NE(a.treatments(), b.treatments());
    for (Index i = 0; i < g.n; ++i) {
        const double a1 = a.treatments()(i) ? a.outcomes()(i) : (*a.counterfactuals())(i);
        const double b1 = b.treatments()(i) ? b.outcomes()(i) : (*b.counterfactuals())(i);
        EXPECT_EQ(a1, b1);
    }
}

TEST(Generator, SurfaceSeedPinsSurfaces) {
    GeneratorConfig g;
    g.surface_seed = 99;
    g.seed = 1;
    const SyntheticModel a(g);
    g.seed = 2;
    const SyntheticModel b(g);
    const Eigen::MatrixXd x = points({0.1, 0.5, 0.8});
    EXPECT_EQ(a.true_ite(x), b.true_ite(x));
    EXPECT_NE(a.sample(10, 1).features(), b.sample(10, 2).features());
}

TEST(Generator, PropensityRespectsClampAndConstant) {
    GeneratorConfig g;
    g.n = 20000;
    g.propensity.kind = PropensitySpec::Kind::Constant;
    g.propensity.gamma = 0.3;
    const auto ds = generate(g);
    EXPECT_NEAR(ds.view().count_arm(1) / 20000.0, 0.3, 0.015);

    g.propensity = {};
    g.propensity.weights = {1.0};
    g.propensity.steepness = 10.0;
    g.gamma_min = 0.1;
    g.gamma_max = 0.9;
    const SyntheticModel m(g);
    const Eigen::VectorXd p = m.propensity(points({0.0, 0.45, 0.5, 0.55, 1.0}));
    EXPECT_DOUBLE_EQ(p(0), 0.1);
    EXPECT_DOUBLE_EQ(p(4), 0.9);
    EXPECT_DOUBLE_EQ(p(2), 0.5);
    EXPECT_NEAR(p(3), 1.0 / (1.0 + std::exp(-0.5)), 1e-12);
}

TEST(Generator, BinaryColumns) {
    GeneratorConfig g;
    g.n = 2000;
    g.d = 3;
    g.binary_columns = {2};
    g.binary_probability = 0.25;
    const auto ds = generate(g);
    const auto col = ds.features().col(2);
    EXPECT_TRUE(((col.array() == 0.0) || (col.array() == 1.0)).all());
    EXPECT_NEAR(col.mean(), 0.25, 0.03);
}

TEST(Generator, ValidationErrors) {
    GeneratorConfig g;
    g.gamma_min = 0.0;
    EXPECT_THROW(g.validate(), ConfigError);
    g = {};
    g.relevant_dims0 = {3};
    EXPECT_THROW(g.validate(), ConfigError);
    g = {};
    g.surface1 = LinearSpec{{1.0, 2.0}, 0.0};
    EXPECT_THROW(g.validate(), ConfigError);
    EXPECT_THROW(nlohmann::json({{"n", 10}, {"typo", 1}}).get<GeneratorConfig>(), ConfigError);
}

TEST(Generator, JsonRoundTrip) {
    GeneratorConfig g;
    g.d = 2;
    g.surface0 = PolynomialSpec{{0.0, 1.0}};
    g.surface1 = GpDrawSpec{2.5, 0.3, 2.0, 64};
    g.propensity.weights = {1.0, -1.0};
    g.propensity.steepness = 3.0;
    g.binary_columns = {1};
    g.seed = 8;
    g.surface_seed = 3;
    const nlohmann::json j = g;
    const GeneratorConfig back = j.get<GeneratorConfig>();
    EXPECT_EQ(nlohmann::json(back), j);
    EXPECT_EQ(generate(back).view(), generate(g).view());
}

TEST(IhdpAnalog, Shape) {
    IhdpAnalogConfig c;
    c.seed = 3;
    const auto ds = ihdp_analog(c);
    EXPECT_EQ(ds.n(), 747);
    EXPECT_EQ(ds.d(), 25);
    for (Index k = 0; k < 25; ++k) {
        const auto col = ds.features().col(k);
        if (k < kIhdpContinuous) {
            EXPECT_GT(col.minCoeff(), 0.0);
            EXPECT_LT(col.maxCoeff(), 1.0);
            EXPECT_GT((col.array() != col.array().round()).count(), 700);
        } else {
            EXPECT_TRUE(((col.array() == 0.0) || (col.array() == 1.0)).all());
        }
    }
}

TEST(IhdpAnalog, CalibratedTreatedFractionAndEffect) {
    IhdpAnalogConfig c;
    c.surface_seed = 42;
    c.steepness = 2.0;
    GeneratorConfig g = ihdp_analog_config(c);
    const SyntheticModel m(g);
    const auto ds = m.sample(200000, 5);
    const Index treated = ds.view().count_arm(1);
    EXPECT_NEAR(treated / 200000.0, 139.0 / 747.0, 0.005);
    double sum = 0.0, sq = 0.0;
    for (Index i = 0; i < ds.n(); ++i)
        if (ds.treatments()(i)) sum += (*ds.true_ite())(i), sq += std::pow((*ds.true_ite())(i), 2);
    const double att = sum / treated, sd = std::sqrt(sq / treated - att * att);
    // Monte-Carlo error of this sample plus that of the calibration sample.
    const double tol = 4.0 * sd * (1.0 / std::sqrt(treated) + 1.0 / std::sqrt(139.0 / 747.0 * kIhdpReferencePoints));
    EXPECT_NEAR(att, 4.0, tol);
    EXPECT_LT(tol, 0.5);
    EXPECT_GT(ds.true_ite()->maxCoeff() - ds.true_ite()->minCoeff(), 0.5);
}

TEST(IhdpAnalog, SurfacesDependOnlyOnSurfaceSeed) {
    IhdpAnalogConfig a, b;
    a.surface_seed = b.surface_seed = 4;
    a.seed = 1;
    b.seed = 2;
    const nlohmann::json ja = ihdp_analog_config(a), jb = ihdp_analog_config(b);
    EXPECT_EQ(ja["surface0"], jb["surface0"]);
    EXPECT_EQ(ja["surface1"], jb["surface1"]);
    EXPECT_EQ(ja["propensity"], jb["propensity"]);
}
