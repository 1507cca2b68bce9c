#ifndef MTGP_TESTS_ORACLE_HPP
#define MTGP_TESTS_ORACLE_HPP

// Dense reference formulas used as test oracles. Matérn correlations come
// from the general Bessel form, solves go through an explicit LU inverse.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <variant>

#include <gsl/gsl_sf_bessel.h>
#include <gsl/gsl_sf_gamma.h>

#include "mtgp/mtgp.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double matern(double nu, double r) {
    if (r == 0.0) return 1.0;
    const double z = std::sqrt(2.0 * nu) * r;
    return std::pow(2.0, 1.0 - nu) / gsl_sf_gamma(nu) * std::pow(z, nu) * gsl_sf_bessel_Knu(nu, z);
}

inline double scalar_kernel(const mtgp::ScalarKernelSpec& k, const VectorXd& x, const VectorXd& y) {
    double r2 = 0.0;
    for (int i = 0; i < x.size(); ++i) r2 += std::pow((x(i) - y(i)) / k.length_scales(i), 2);
    const double r = std::sqrt(r2);
    if (k.family == mtgp::KernelFamily::SquaredExponential) return k.variance * std::exp(-0.5 * r2);
    return k.variance * matern(k.nu, r);
}

/// cov(f_a(x), f_b(y)) under either prior structure.
inline double latent_cov(const mtgp::PriorStructure& prior, const VectorXd& x, int a, const VectorXd& y, int b) {
    if (const auto* t1 = std::get_if<mtgp::TypeIPrior>(&prior)) {
        VectorXd xa(x.size() + 1), yb(y.size() + 1);
        xa << x, static_cast<double>(a);
        yb << y, static_cast<double>(b);
        return scalar_kernel(t1->kernel, xa, yb);
    }
    const auto& s = std::get<mtgp::TypeIIPrior>(prior).kernel;
    Eigen::Matrix2d A, B;
    A << s.a00 * s.a00, s.a01, s.a10, s.epsilon;
    B << s.epsilon, s.b01, s.b10, s.b11;
    return A(a, b) * scalar_kernel(s.k0, x, y) + B(a, b) * scalar_kernel(s.k1, x, y);
}

inline double noise(const mtgp::PriorStructure& prior, int arm) {
    if (const auto* t1 = std::get_if<mtgp::TypeIPrior>(&prior)) return t1->noise_variance;
    const auto& t2 = std::get<mtgp::TypeIIPrior>(prior);
    return arm == 0 ? t2.noise0 : t2.noise1;
}

struct Posterior {
    VectorXd mean0, mean1, var0, var1, cov01;
    double lml = 0.0;
};

inline Posterior posterior(const mtgp::PriorStructure& prior, const mtgp::DatasetView& train, const MatrixXd& xq) {
    const int n = static_cast<int>(train.n());
    const bool type2 = std::holds_alternative<mtgp::TypeIIPrior>(prior);
    double offset[2];
    if (type2) {
        for (int a = 0; a < 2; ++a) {
            double s = 0.0;
            int c = 0;
            for (int i = 0; i < n; ++i)
                if (train.treatments(i) == a) s += train.outcomes(i), ++c;
            offset[a] = c ? s / c : train.outcomes.mean();
        }
    } else {
        offset[0] = offset[1] = train.outcomes.mean();
    }
    MatrixXd K(n, n);
    VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        y(i) = train.outcomes(i) - offset[train.treatments(i)];
        for (int j = 0; j < n; ++j)
            K(i, j) = latent_cov(prior, train.features.row(i).transpose(), train.treatments(i),
                                 train.features.row(j).transpose(), train.treatments(j));
        K(i, i) += noise(prior, train.treatments(i));
    }
    const Eigen::FullPivLU<MatrixXd> lu(K);
    const MatrixXd Kinv = lu.inverse();
    const int m = static_cast<int>(xq.rows());
    Posterior p;
    p.mean0.resize(m);
    p.mean1.resize(m);
    p.var0.resize(m);
    p.var1.resize(m);
    p.cov01.resize(m);
    for (int q = 0; q < m; ++q) {
        const VectorXd x = xq.row(q).transpose();
        VectorXd k0(n), k1(n);
        for (int i = 0; i < n; ++i) {
            const VectorXd xi = train.features.row(i).transpose();
            k0(i) = latent_cov(prior, xi, train.treatments(i), x, 0);
            k1(i) = latent_cov(prior, xi, train.treatments(i), x, 1);
        }
        p.mean0(q) = k0.dot(Kinv * y) + offset[0];
        p.mean1(q) = k1.dot(Kinv * y) + offset[1];
        p.var0(q) = latent_cov(prior, x, 0, x, 0) - k0.dot(Kinv * k0);
        p.var1(q) = latent_cov(prior, x, 1, x, 1) - k1.dot(Kinv * k1);
        p.cov01(q) = latent_cov(prior, x, 0, x, 1) - k0.dot(Kinv * k1);
    }
    p.lml = -0.5 * y.dot(Kinv * y) - 0.5 * std::log(std::abs(lu.determinant())) -
            0.5 * n * std::log(2.0 * std::numbers::pi);
    return p;
}

/// Hand loop over held-out subjects: squared factual residual and
/// counterfactual posterior variance plus that arm's noise.
inline std::pair<double, double> information_terms(const mtgp::PriorStructure& prior, const mtgp::DatasetView& train,
                                                   const mtgp::DatasetView& eval) {
    const Posterior p = posterior(prior, train, eval.features);
    double bias = 0.0, var = 0.0;
    for (int i = 0; i < eval.n(); ++i) {
        const int w = eval.treatments(i);
        const double mean = w ? p.mean1(i) : p.mean0(i);
        bias += (eval.outcomes(i) - mean) * (eval.outcomes(i) - mean);
        var += (w ? p.var0(i) : p.var1(i)) + noise(prior, 1 - w);
    }
    return {bias, var};
}

// ---------------------------------------------------------------------------
// Random instances

inline double pick_nu(std::mt19937_64& rng) {
    const double levels[] = {0.5, 1.5, 2.5};
    return levels[std::uniform_int_distribution<int>(0, 2)(rng)];
}

inline VectorXd random_scales(std::mt19937_64& rng, int d, double lo = 0.3, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = u(rng);
    return v;
}

inline mtgp::PriorStructure random_prior(std::mt19937_64& rng, int d, bool type2) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (!type2) {
        mtgp::TypeIPrior p;
        p.kernel = mtgp::ScalarKernelSpec::matern(pick_nu(rng), random_scales(rng, d + 1), 0.5 + u(rng));
        p.noise_variance = 0.05 + 0.3 * u(rng);
        return p;
    }
    mtgp::TypeIIPrior p;
    p.kernel = mtgp::LmcKernelSpec::from_correlations(
        mtgp::ScalarKernelSpec::matern(pick_nu(rng), random_scales(rng, d), 0.5 + u(rng)),
        mtgp::ScalarKernelSpec::matern(pick_nu(rng), random_scales(rng, d), 0.5 + u(rng)), 0.5 + u(rng), 0.5 + u(rng),
        2.0 * u(rng) - 1.0, 2.0 * u(rng) - 1.0);
    p.noise0 = 0.05 + 0.3 * u(rng);
    p.noise1 = 0.05 + 0.3 * u(rng);
    return p;
}

/// n subjects with both arms present.
inline mtgp::DatasetView random_view(std::mt19937_64& rng, int n, int d) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    mtgp::DatasetView v;
    v.features.resize(n, d);
    v.treatments.resize(n);
    v.outcomes.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) v.features(i, k) = u(rng);
        v.treatments(i) = i < 2 ? i : (u(rng) < 0.5 ? 1 : 0);
        v.outcomes(i) = std::sin(3.0 * v.features(i, 0)) + v.treatments(i) + 0.3 * g(rng);
    }
    return v;
}

}  // namespace oracle

#endif  // MTGP_TESTS_ORACLE_HPP
