#ifndef MTGP_METRICS_HPP
#define MTGP_METRICS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mtgp/errors.hpp"
#include "mtgp/gp.hpp"

namespace mtgp {

/// Mean squared difference between predicted and true effects.
inline double pehe(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
    if (predicted.size() != truth.size())
        throw ShapeError("pehe: length mismatch (" + std::to_string(predicted.size()) + " vs " +
                         std::to_string(truth.size()) + ")");
    if (predicted.size() < 1) throw ShapeError("pehe: empty input");
    return (predicted - truth).squaredNorm() / static_cast<double>(predicted.size());
}

inline double sqrt_pehe(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
    return std::sqrt(pehe(predicted, truth));
}

/// Gaussian-location surrogate of the expected KL risk: mean over queries of
/// |E[T(x)|D] - T(x)|^2 / (2 (s0 + s1)). An upper-bound form, not the exact
/// Gaussian-vs-mixture divergence.
inline double expected_kl_risk(const PosteriorSummary& posterior, const Eigen::VectorXd& true_ite, double noise0,
                               double noise1) {
    if (!(noise0 > 0.0) || !(noise1 > 0.0)) throw ConfigError("expected_kl_risk: noise variances must be positive");
    return pehe(posterior.ite_mean, true_ite) / (2.0 * (noise0 + noise1));
}

/// Exponent of the minimax information rate: the slower of the two arms'
/// nonparametric rates n^{-2a/(2a+p)}.
inline double optimal_rate_oracle(double alpha0, double alpha1, double p0, double p1) {
    if (!(alpha0 > 0.0 && alpha1 > 0.0 && p0 > 0.0 && p1 > 0.0) || !std::isfinite(alpha0 + alpha1 + p0 + p1))
        throw ConfigError("optimal_rate_oracle: smoothness and dimensions must be positive and finite");
    return std::max(-2.0 * alpha0 / (2.0 * alpha0 + p0), -2.0 * alpha1 / (2.0 * alpha1 + p1));
}

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = std::numeric_limits<double>::quiet_NaN();  // NaN with two points
};

/// OLS fit of log(y) = intercept + slope * log(x).
inline LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ShapeError("fit_loglog: length mismatch");
    if (x.size() < 2) throw ConfigError("fit_loglog: need at least two points");
    const auto m = static_cast<Eigen::Index>(x.size());
    Eigen::VectorXd lx(m), ly(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (!(x[static_cast<std::size_t>(i)] > 0.0) || !(y[static_cast<std::size_t>(i)] > 0.0))
            throw NumericalError("fit_loglog: inputs must be positive");
        lx(i) = std::log(x[static_cast<std::size_t>(i)]);
        ly(i) = std::log(y[static_cast<std::size_t>(i)]);
    }
    const double mx = lx.mean(), my = ly.mean();
    const double sxx = (lx.array() - mx).square().sum();
    if (!(sxx > 0.0)) throw NumericalError("fit_loglog: x values are all equal");
    LogLogFit fit;
    fit.slope = ((lx.array() - mx) * (ly.array() - my)).sum() / sxx;
    fit.intercept = my - fit.slope * mx;
    if (m > 2) {
        const double rss = (ly.array() - fit.intercept - fit.slope * lx.array()).square().sum();
        fit.slope_se = std::sqrt(rss / static_cast<double>(m - 2) / sxx);
    }
    return fit;
}

/// Linear-interpolation quantile (R type 7).
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw ConfigError("quantile: empty input");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(const std::vector<double>& v) { return quantile(v, 0.5); }

/// Mean with a 95% normal-approximation interval. The interval is empty for
/// fewer than two values.
struct MeanInterval {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double sd = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> lower, upper;
    std::size_t count = 0;
};

inline MeanInterval mean_interval(const std::vector<double>& v) {
    MeanInterval r;
    r.count = v.size();
    if (v.empty()) return r;
    double sum = 0.0;
    for (double x : v) sum += x;
    r.mean = sum / static_cast<double>(v.size());
    if (v.size() < 2) return r;
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    const double half = 1.96 * r.sd / std::sqrt(static_cast<double>(v.size()));
    r.lower = r.mean - half;
    r.upper = r.mean + half;
    return r;
}

}  // namespace mtgp

#endif  // MTGP_METRICS_HPP
