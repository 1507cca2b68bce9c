#ifndef MTGP_KERNELS_HPP
#define MTGP_KERNELS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtgp/errors.hpp"
#include "mtgp/json_util.hpp"

namespace mtgp {

enum class KernelFamily { Matern, SquaredExponential };

/// Stationary scalar covariance with ARD length-scales.
///
/// Matérn is restricted to the half-integer smoothness levels with closed
/// forms, with r the ARD-scaled Euclidean distance:
///   nu = 1/2: s2 * exp(-r)
///   nu = 3/2: s2 * (1 + sqrt(3) r) exp(-sqrt(3) r)
///   nu = 5/2: s2 * (1 + sqrt(5) r + 5 r^2 / 3) exp(-sqrt(5) r)
/// The squared exponential is s2 * exp(-r^2 / 2). The smoothness level is
/// identified with the Hölder order of the sample paths it targets.
struct ScalarKernelSpec {
    KernelFamily family = KernelFamily::Matern;
    double nu = 2.5;
    Eigen::VectorXd length_scales;
    double variance = 1.0;

    Eigen::Index dim() const { return length_scales.size(); }

    static bool is_allowed_nu(double nu) { return nu == 0.5 || nu == 1.5 || nu == 2.5; }

    void validate() const {
        if (length_scales.size() < 1) throw ConfigError("kernel: at least one length-scale required");
        if (!(length_scales.array() > 0.0).all() || !length_scales.allFinite())
            throw ConfigError("kernel: length-scales must be positive and finite");
        if (!(variance > 0.0) || !std::isfinite(variance)) throw ConfigError("kernel: variance must be positive");
        if (family == KernelFamily::Matern && !is_allowed_nu(nu))
            throw ConfigError("kernel: Matern smoothness must be one of 1/2, 3/2, 5/2 (got " + std::to_string(nu) + ")");
    }

    static ScalarKernelSpec matern(double nu, Eigen::VectorXd length_scales, double variance = 1.0) {
        ScalarKernelSpec s{KernelFamily::Matern, nu, std::move(length_scales), variance};
        s.validate();
        return s;
    }

    static ScalarKernelSpec squared_exponential(Eigen::VectorXd length_scales, double variance = 1.0) {
        ScalarKernelSpec s{KernelFamily::SquaredExponential, 0.0, std::move(length_scales), variance};
        s.validate();
        return s;
    }

    friend bool operator==(const ScalarKernelSpec& a, const ScalarKernelSpec& b) {
        return a.family == b.family && a.nu == b.nu && a.variance == b.variance &&
               a.length_scales.size() == b.length_scales.size() && a.length_scales == b.length_scales;
    }
};

/// Unit-variance correlation as a function of the scaled distance r >= 0.
inline double correlation(KernelFamily family, double nu, double r) {
    if (family == KernelFamily::SquaredExponential) return std::exp(-0.5 * r * r);
    if (nu == 0.5) return std::exp(-r);
    if (nu == 1.5) {
        const double s = std::sqrt(3.0) * r;
        return (1.0 + s) * std::exp(-s);
    }
    const double s = std::sqrt(5.0) * r;
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

inline double eval_scalar(const ScalarKernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& xp) {
    if (x.size() != spec.dim() || xp.size() != spec.dim())
        throw ShapeError("kernel: expected inputs of dimension " + std::to_string(spec.dim()) + ", got " +
                         std::to_string(x.size()) + " and " + std::to_string(xp.size()));
    double r2 = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double t = (x(k) - xp(k)) / spec.length_scales(k);
        r2 += t * t;
    }
    return spec.variance * correlation(spec.family, spec.nu, std::sqrt(r2));
}

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline RowMatrix scaled_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& length_scales) {
    return (x.array().rowwise() / length_scales.transpose().array()).matrix();
}

}  // namespace detail

namespace detail {

/// Pairwise squared distances between rows of a and b. Low-dimensional
/// inputs use direct differences; from 8 columns on the norm expansion
/// (one matrix product) is used, clamped at zero. With `same` the result is
/// exactly symmetric with a zero diagonal.
inline Eigen::MatrixXd squared_distances(const RowMatrix& a, const RowMatrix& b, bool same) {
    const Eigen::Index n = a.rows(), m = b.rows(), d = a.cols();
    Eigen::MatrixXd out(n, m);
    if (d >= 8) {
        const Eigen::VectorXd na = a.rowwise().squaredNorm();
        const Eigen::VectorXd nb = same ? na : Eigen::VectorXd(b.rowwise().squaredNorm());
        out.noalias() = -2.0 * a * b.transpose();
        out.colwise() += na;
        out.rowwise() += nb.transpose();
        out = out.cwiseMax(0.0);
        if (same) {
            for (Eigen::Index j = 0; j < m; ++j) {
                out(j, j) = 0.0;
                for (Eigen::Index i = j + 1; i < n; ++i) out(j, i) = out(i, j);
            }
        }
        return out;
    }
    for (Eigen::Index j = 0; j < m; ++j) {
        const double* bj = b.row(j).data();
        const Eigen::Index start = same ? j : 0;
        for (Eigen::Index i = start; i < n; ++i) {
            const double* ai = a.row(i).data();
            double r2 = 0.0;
            for (Eigen::Index k = 0; k < d; ++k) {
                const double t = ai[k] - bj[k];
                r2 += t * t;
            }
            out(i, j) = r2;
            if (same) out(j, i) = r2;
        }
    }
    return out;
}

/// In place: squared scaled distances -> variance * correlation(r).
inline void apply_correlation(Eigen::MatrixXd& r2, KernelFamily family, double nu, double variance) {
    auto r = r2.array();
    if (family == KernelFamily::SquaredExponential) {
        r = variance * (-0.5 * r).exp();
    } else if (nu == 0.5) {
        r = variance * (-r.sqrt()).exp();
    } else if (nu == 1.5) {
        const auto s = (3.0 * r).sqrt().eval();
        r = variance * (1.0 + s) * (-s).exp();
    } else {
        const auto s = (5.0 * r).sqrt().eval();
        r = variance * (1.0 + s + s.square() / 3.0) * (-s).exp();
    }
}

}  // namespace detail

/// Dense covariance matrix k(X_i, X'_j). When `same` is set the inputs are
/// taken to be identical and the result is exactly symmetric.
inline Eigen::MatrixXd scalar_gram(const ScalarKernelSpec& spec, const Eigen::MatrixXd& x, const Eigen::MatrixXd& xp,
                                   bool same = false) {
    if (x.cols() != spec.dim() || xp.cols() != spec.dim())
        throw ShapeError("kernel: expected " + std::to_string(spec.dim()) + " input columns, got " +
                         std::to_string(x.cols()) + " and " + std::to_string(xp.cols()));
    const detail::RowMatrix a = detail::scaled_rows(x, spec.length_scales);
    const detail::RowMatrix b = same ? a : detail::scaled_rows(xp, spec.length_scales);
    Eigen::MatrixXd out = detail::squared_distances(a, b, same);
    detail::apply_correlation(out, spec.family, spec.nu, spec.variance);
    return out;
}

/// Linear model of coregionalization over the two potential-outcome surfaces:
///   K(x, x') = A k0(x, x') + B k1(x, x'),
///   A = [[a00^2, a01], [a10, eps]],  B = [[eps, b01], [b10, b11]].
/// k0 carries the smoothness of f0 and k1 that of f1; eps is a fixed guard
/// keeping A and B positive semi-definite.
struct LmcKernelSpec {
    ScalarKernelSpec k0;
    ScalarKernelSpec k1;
    double a00 = 1.0;
    double a01 = 0.0;
    double a10 = 0.0;
    double b01 = 0.0;
    double b10 = 0.0;
    double b11 = 1.0;
    double epsilon = 1e-4;

    static constexpr double kDefaultEpsilon = 1e-4;

    /// Builds a spec whose cross-terms are a01 = rho_a a00 sqrt(eps) and
    /// b01 = rho_b sqrt(b11 eps), which keeps A and B PSD for |rho| <= 1.
    static LmcKernelSpec from_correlations(ScalarKernelSpec k0, ScalarKernelSpec k1, double a00, double b11,
                                           double rho_a, double rho_b, double epsilon = kDefaultEpsilon) {
        LmcKernelSpec s;
        s.k0 = std::move(k0);
        s.k1 = std::move(k1);
        s.a00 = a00;
        s.b11 = b11;
        s.epsilon = epsilon;
        s.a01 = s.a10 = rho_a * a00 * std::sqrt(epsilon);
        s.b01 = s.b10 = rho_b * std::sqrt(b11 * epsilon);
        s.validate();
        return s;
    }

    Eigen::Matrix2d A() const {
        Eigen::Matrix2d m;
        m << a00 * a00, a01, a10, epsilon;
        return m;
    }

    Eigen::Matrix2d B() const {
        Eigen::Matrix2d m;
        m << epsilon, b01, b10, b11;
        return m;
    }

    Eigen::Index dim() const { return k0.dim(); }

    /// Prior variance of f_task at any point.
    double task_variance(int task) const {
        return task == 0 ? a00 * a00 * k0.variance + epsilon * k1.variance : epsilon * k0.variance + b11 * k1.variance;
    }

    void validate() const {
        k0.validate();
        k1.validate();
        if (k0.dim() != k1.dim()) throw ShapeError("LMC kernel: k0 and k1 dimensions differ");
        if (!(epsilon > 0.0)) throw ConfigError("LMC kernel: epsilon must be positive");
        if (!(a00 > 0.0) || !(b11 > 0.0)) throw ConfigError("LMC kernel: task variances a00, b11 must be positive");
        if (a01 != a10 || b01 != b10) throw ConfigError("LMC kernel: A and B must be symmetric (a01 = a10, b01 = b10)");
        const double tol = 1e-12;
        if (a01 * a01 > a00 * a00 * epsilon * (1.0 + tol))
            throw ConfigError("LMC kernel: |a01| exceeds a00 sqrt(eps); A would not be PSD");
        if (b01 * b01 > b11 * epsilon * (1.0 + tol))
            throw ConfigError("LMC kernel: |b01| exceeds sqrt(b11 eps); B would not be PSD");
    }

    friend bool operator==(const LmcKernelSpec&, const LmcKernelSpec&) = default;
};

inline Eigen::Matrix2d eval_lmc(const LmcKernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& xp) {
    return spec.A() * eval_scalar(spec.k0, x, xp) + spec.B() * eval_scalar(spec.k1, x, xp);
}

/// Gram matrix indexed by task: entry (i, j) is [K(x_i, x'_j)]_{t_i, t'_j}.
inline Eigen::MatrixXd gram(const LmcKernelSpec& spec, const Eigen::MatrixXd& x, const Eigen::MatrixXd& xp,
                            const Eigen::VectorXi& tasks, const Eigen::VectorXi& tasks_p, bool same = false) {
    if (tasks.size() != x.rows() || tasks_p.size() != xp.rows())
        throw ShapeError("gram: task vectors must match the number of input rows");
    for (const auto* t : {&tasks, &tasks_p})
        if (t->size() && ((t->array() != 0) && (t->array() != 1)).any()) throw ConfigError("gram: tasks must be 0 or 1");
    const Eigen::MatrixXd g0 = scalar_gram(spec.k0, x, xp, same);
    const Eigen::MatrixXd g1 = scalar_gram(spec.k1, x, xp, same);
    const Eigen::Matrix2d a = spec.A(), b = spec.B();
    Eigen::MatrixXd out(x.rows(), xp.rows());
    for (Eigen::Index j = 0; j < xp.rows(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            out(i, j) = a(tasks(i), tasks_p(j)) * g0(i, j) + b(tasks(i), tasks_p(j)) * g1(i, j);
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const ScalarKernelSpec& s) {
    j = nlohmann::json{{"family", s.family == KernelFamily::Matern ? "matern" : "squared_exponential"},
                       {"nu", s.nu},
                       {"length_scales", json_util::to_array(s.length_scales)},
                       {"variance", s.variance}};
}

inline void from_json(const nlohmann::json& j, ScalarKernelSpec& s) {
    const std::string where = "kernel";
    json_util::check_keys(j, {"family", "nu", "length_scales", "variance"}, where);
    const auto family = json_util::get<std::string>(j, "family", where);
    if (family == "matern")
        s.family = KernelFamily::Matern;
    else if (family == "squared_exponential")
        s.family = KernelFamily::SquaredExponential;
    else
        throw ConfigError(where + ".family: unknown kernel family '" + family + "'");
    s.nu = json_util::get_or<double>(j, "nu", 0.0, where);
    s.length_scales = json_util::to_vector(json_util::get<std::vector<double>>(j, "length_scales", where));
    s.variance = json_util::get<double>(j, "variance", where);
    s.validate();
}

inline void to_json(nlohmann::json& j, const LmcKernelSpec& s) {
    j = nlohmann::json{{"k0", s.k0},   {"k1", s.k1},   {"a00", s.a00}, {"a01", s.a01},
                       {"a10", s.a10}, {"b01", s.b01}, {"b10", s.b10}, {"b11", s.b11},
                       {"epsilon", s.epsilon}};
}

inline void from_json(const nlohmann::json& j, LmcKernelSpec& s) {
    const std::string where = "lmc_kernel";
    json_util::check_keys(j, {"k0", "k1", "a00", "a01", "a10", "b01", "b10", "b11", "epsilon"}, where);
    s.k0 = json_util::get<ScalarKernelSpec>(j, "k0", where);
    s.k1 = json_util::get<ScalarKernelSpec>(j, "k1", where);
    s.a00 = json_util::get<double>(j, "a00", where);
    s.a01 = json_util::get_or<double>(j, "a01", 0.0, where);
    s.a10 = json_util::get_or<double>(j, "a10", s.a01, where);
    s.b01 = json_util::get_or<double>(j, "b01", 0.0, where);
    s.b10 = json_util::get_or<double>(j, "b10", s.b01, where);
    s.b11 = json_util::get<double>(j, "b11", where);
    s.epsilon = json_util::get_or<double>(j, "epsilon", LmcKernelSpec::kDefaultEpsilon, where);
    s.validate();
}

}  // namespace mtgp

#endif  // MTGP_KERNELS_HPP
