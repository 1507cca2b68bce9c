#ifndef MTGP_GP_HPP
#define MTGP_GP_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <variant>

#include <json.hpp>

#include "mtgp/dataset.hpp"
#include "mtgp/errors.hpp"
#include "mtgp/json_util.hpp"
#include "mtgp/kernels.hpp"

namespace mtgp {

inline constexpr double kNoiseFloor = 1e-6;

enum class Structure { TypeI, TypeII };

/// Treatment treated as an extra input coordinate: f(x, w) with a single
/// scalar kernel over the (d+1)-dimensional augmented input. The last
/// length-scale belongs to the treatment coordinate.
struct TypeIPrior {
    ScalarKernelSpec kernel;
    double noise_variance = 1.0;

    friend bool operator==(const TypeIPrior&, const TypeIPrior&) = default;
};

/// Vector-valued prior [f0(x), f1(x)] under an LMC kernel, one noise level
/// per arm.
struct TypeIIPrior {
    LmcKernelSpec kernel;
    double noise0 = 1.0;
    double noise1 = 1.0;

    friend bool operator==(const TypeIIPrior&, const TypeIIPrior&) = default;
};

using PriorStructure = std::variant<TypeIPrior, TypeIIPrior>;

inline Structure structure_of(const PriorStructure& p) {
    return std::holds_alternative<TypeIPrior>(p) ? Structure::TypeI : Structure::TypeII;
}

/// Feature dimension d the prior accepts (excludes the treatment coordinate).
inline Index feature_dim(const PriorStructure& p) {
    if (const auto* t1 = std::get_if<TypeIPrior>(&p)) return t1->kernel.dim() - 1;
    return std::get<TypeIIPrior>(p).kernel.dim();
}

inline double noise_variance(const PriorStructure& p, int arm) {
    if (const auto* t1 = std::get_if<TypeIPrior>(&p)) return t1->noise_variance;
    const auto& t2 = std::get<TypeIIPrior>(p);
    return arm == 0 ? t2.noise0 : t2.noise1;
}

inline void validate(const PriorStructure& p) {
    if (const auto* t1 = std::get_if<TypeIPrior>(&p)) {
        t1->kernel.validate();
        if (t1->kernel.dim() < 2) throw ConfigError("Type-I prior: kernel must cover d features plus the treatment");
        if (!(t1->noise_variance >= kNoiseFloor)) throw ConfigError("Type-I prior: noise variance below floor 1e-6");
    } else {
        const auto& t2 = std::get<TypeIIPrior>(p);
        t2.kernel.validate();
        if (!(t2.noise0 >= kNoiseFloor) || !(t2.noise1 >= kNoiseFloor))
            throw ConfigError("Type-II prior: noise variances below floor 1e-6");
    }
}

/// Pointwise posterior of both potential-outcome surfaces and of the effect
/// T(x) = f1(x) - f0(x).
struct PosteriorSummary {
    Eigen::MatrixXd query;
    Eigen::VectorXd mean0, mean1;
    Eigen::VectorXd var0, var1;
    Eigen::VectorXd cov01;
    Eigen::VectorXd ite_mean;
    Eigen::VectorXd ite_var;

    Index size() const { return mean0.size(); }
    const Eigen::VectorXd& mean(int arm) const { return arm == 0 ? mean0 : mean1; }
    const Eigen::VectorXd& var(int arm) const { return arm == 0 ? var0 : var1; }
};

// ---------------------------------------------------------------------------
// Cholesky with jitter escalation

struct JitteredCholesky {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
};

/// Factorizes `k`, retrying with diagonal jitter 1e-10 s, 1e-9 s, ..., 1e-4 s
/// where s = trace(k) / n.
inline JitteredCholesky robust_cholesky(const Eigen::MatrixXd& k) {
    JitteredCholesky out;
    out.llt.compute(k);
    if (out.llt.info() == Eigen::Success) return out;

    const double scale = k.trace() / static_cast<double>(k.rows());
    for (double jitter = 1e-10 * scale; jitter <= 1e-4 * scale * (1.0 + 1e-9); jitter *= 10.0) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        out.llt.compute(kj);
        if (out.llt.info() == Eigen::Success) {
            out.jitter = jitter;
            return out;
        }
    }
    std::ostringstream msg;
    msg << "Cholesky factorization failed after jitter " << 1e-4 * scale << " (n=" << k.rows()
        << ", trace/n=" << scale << ", diag range [" << k.diagonal().minCoeff() << ", " << k.diagonal().maxCoeff()
        << "]";
    if (k.rows() <= 2000 && k.allFinite()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
        msg << ", eigenvalue range [" << es.eigenvalues().minCoeff() << ", " << es.eigenvalues().maxCoeff() << "]";
    } else if (!k.allFinite()) {
        msg << ", non-finite entries";
    }
    msg << ")";
    throw NumericalError(msg.str());
}

/// Prior covariances of the latent surfaces at a fixed input set,
///   cov(f_a(x_i), f_b(x_j)) = c0(a, b) m0(i, j) + c1(a, b) m1(i, j).
/// Type-II: m0, m1 are the two scalar Grams, c0 = A, c1 = B. Type-I: m0 is
/// the same-arm Gram, m1 the cross-arm Gram.
class PriorCovariance {
public:
    PriorCovariance(const PriorStructure& prior, const Eigen::MatrixXd& x) {
        validate(prior);
        if (x.cols() != feature_dim(prior))
            throw ShapeError("prior covariance: kernel expects d=" + std::to_string(feature_dim(prior)) +
                             " features, input has d=" + std::to_string(x.cols()));
        if (const auto* t1 = std::get_if<TypeIPrior>(&prior)) {
            const auto& k = t1->kernel;
            const Index d = x.cols();
            const Eigen::VectorXd ls = k.length_scales.head(d);
            const detail::RowMatrix a = detail::scaled_rows(x, ls);
            const double arm_lag2 = 1.0 / (k.length_scales(d) * k.length_scales(d));
            const Eigen::MatrixXd r2 = detail::squared_distances(a, a, true);
            m0_ = r2;
            m1_ = (r2.array() + arm_lag2).matrix();
            detail::apply_correlation(m0_, k.family, k.nu, k.variance);
            detail::apply_correlation(m1_, k.family, k.nu, k.variance);
            c0_ << 1.0, 0.0, 0.0, 1.0;
            c1_ << 0.0, 1.0, 1.0, 0.0;
        } else {
            const auto& spec = std::get<TypeIIPrior>(prior).kernel;
            m0_ = scalar_gram(spec.k0, x, x, true);
            m1_ = scalar_gram(spec.k1, x, x, true);
            c0_ = spec.A();
            c1_ = spec.B();
        }
    }

    double operator()(Index i, int a, Index j, int b) const { return c0_(a, b) * m0_(i, j) + c1_(a, b) * m1_(i, j); }

private:
    Eigen::MatrixXd m0_, m1_;
    Eigen::Matrix2d c0_, c1_;
};

// ---------------------------------------------------------------------------
// Fitted model

/// Exact GP posterior conditioned on the factual observations. Outcomes are
/// centered by the training mean (per arm for Type-II, global for Type-I) and
/// the prior mean is zero around that offset.
class FittedModel {
public:
    FittedModel(PriorStructure prior, DatasetView train) : prior_(std::move(prior)), train_(std::move(train)) {
        validate(prior_);
        if (train_.n() < 1) throw ConfigError("fit_posterior: empty training set");
        if (train_.d() != feature_dim(prior_))
            throw ShapeError("fit_posterior: kernel expects d=" + std::to_string(feature_dim(prior_)) +
                             " features, dataset has d=" + std::to_string(train_.d()));

        const Index n = train_.n();
        const double global_mean = train_.outcomes.mean();
        offset_[0] = offset_[1] = global_mean;
        if (structure_of(prior_) == Structure::TypeII) {
            for (int arm = 0; arm < 2; ++arm) {
                double sum = 0.0;
                Index count = 0;
                for (Index i = 0; i < n; ++i)
                    if (train_.treatments(i) == arm) sum += train_.outcomes(i), ++count;
                if (count > 0) offset_[arm] = sum / static_cast<double>(count);
            }
        }
        centered_.resize(n);
        for (Index i = 0; i < n; ++i) centered_(i) = train_.outcomes(i) - offset_[train_.treatments(i)];

        Eigen::MatrixXd k = train_gram();
        for (Index i = 0; i < n; ++i) k(i, i) += mtgp::noise_variance(prior_, train_.treatments(i));
        auto chol = robust_cholesky(k);
        llt_ = std::move(chol.llt);
        jitter_ = chol.jitter;
        alpha_ = llt_.solve(centered_);
    }

    const PriorStructure& prior() const { return prior_; }
    const DatasetView& training_data() const { return train_; }
    double jitter() const { return jitter_; }
    double offset(int arm) const { return offset_[arm]; }

    double noise_variance(int arm) const { return mtgp::noise_variance(prior_, arm); }

    /// Gaussian evidence of the centered factual outcomes.
    double log_marginal_likelihood() const {
        const double n = static_cast<double>(train_.n());
        const double log_det_half = llt_.matrixLLT().diagonal().array().log().sum();
        return -0.5 * centered_.dot(alpha_) - log_det_half - 0.5 * n * std::log(2.0 * std::numbers::pi);
    }

    PosteriorSummary predict(const Eigen::MatrixXd& xq) const {
        if (xq.cols() != train_.d())
            throw ShapeError("predict: model has d=" + std::to_string(train_.d()) + " features, query has d=" +
                             std::to_string(xq.cols()));
        const Index m = xq.rows();
        Eigen::MatrixXd cross0, cross1;  // n x m covariances between training outputs and f0(xq), f1(xq)
        double prior_var0 = 0.0, prior_var1 = 0.0, prior_cov01 = 0.0;

        if (const auto* t1 = std::get_if<TypeIPrior>(&prior_)) {
            const Eigen::MatrixXd xa = augmented(train_.features, train_.treatments.cast<double>());
            cross0 = scalar_gram(t1->kernel, xa, augmented(xq, Eigen::VectorXd::Zero(m)));
            cross1 = scalar_gram(t1->kernel, xa, augmented(xq, Eigen::VectorXd::Ones(m)));
            prior_var0 = prior_var1 = t1->kernel.variance;
            const double r = 1.0 / t1->kernel.length_scales(t1->kernel.dim() - 1);
            prior_cov01 = t1->kernel.variance * correlation(t1->kernel.family, t1->kernel.nu, r);
        } else {
            const auto& spec = std::get<TypeIIPrior>(prior_).kernel;
            const Eigen::MatrixXd g0 = scalar_gram(spec.k0, train_.features, xq);
            const Eigen::MatrixXd g1 = scalar_gram(spec.k1, train_.features, xq);
            const Eigen::Matrix2d a = spec.A(), b = spec.B();
            cross0.resize(train_.n(), m);
            cross1.resize(train_.n(), m);
            for (Index j = 0; j < m; ++j)
                for (Index i = 0; i < train_.n(); ++i) {
                    const int t = train_.treatments(i);
                    cross0(i, j) = a(t, 0) * g0(i, j) + b(t, 0) * g1(i, j);
                    cross1(i, j) = a(t, 1) * g0(i, j) + b(t, 1) * g1(i, j);
                }
            prior_var0 = spec.task_variance(0);
            prior_var1 = spec.task_variance(1);
            prior_cov01 = spec.a01 * spec.k0.variance + spec.b01 * spec.k1.variance;
        }

        PosteriorSummary out;
        out.query = xq;
        out.mean0 = (cross0.transpose() * alpha_).array() + offset_[0];
        out.mean1 = (cross1.transpose() * alpha_).array() + offset_[1];
        const Eigen::MatrixXd v0 = llt_.matrixL().solve(cross0);
        const Eigen::MatrixXd v1 = llt_.matrixL().solve(cross1);
        out.var0 = (prior_var0 - v0.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
        out.var1 = (prior_var1 - v1.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
        out.cov01 = (prior_cov01 - (v0.array() * v1.array()).colwise().sum()).matrix().transpose();
        out.ite_mean = out.mean1 - out.mean0;
        out.ite_var = (out.var0 + out.var1 - 2.0 * out.cov01).array().max(0.0).matrix();
        return out;
    }

private:
    static Eigen::MatrixXd augmented(const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
        Eigen::MatrixXd out(x.rows(), x.cols() + 1);
        out.leftCols(x.cols()) = x;
        out.col(x.cols()) = w;
        return out;
    }

    Eigen::MatrixXd train_gram() const {
        if (const auto* t1 = std::get_if<TypeIPrior>(&prior_)) {
            const Eigen::MatrixXd xa = augmented(train_.features, train_.treatments.cast<double>());
            return scalar_gram(t1->kernel, xa, xa, true);
        }
        const auto& spec = std::get<TypeIIPrior>(prior_).kernel;
        return gram(spec, train_.features, train_.features, train_.treatments, train_.treatments, true);
    }

    PriorStructure prior_;
    DatasetView train_;
    double offset_[2] = {0.0, 0.0};
    Eigen::VectorXd centered_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    double jitter_ = 0.0;
};

inline FittedModel fit_posterior(const PriorStructure& prior, const DatasetView& ds) { return {prior, ds}; }

inline PosteriorSummary predict(const FittedModel& model, const Eigen::MatrixXd& xq) { return model.predict(xq); }

inline double log_marginal_likelihood(const PriorStructure& prior, const DatasetView& ds) {
    return FittedModel(prior, ds).log_marginal_likelihood();
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const PriorStructure& p) {
    if (const auto* t1 = std::get_if<TypeIPrior>(&p)) {
        j = nlohmann::json{{"structure", "type1"}, {"kernel", t1->kernel}, {"noise_variance", t1->noise_variance}};
    } else {
        const auto& t2 = std::get<TypeIIPrior>(p);
        j = nlohmann::json{{"structure", "type2"}, {"kernel", t2.kernel}, {"noise0", t2.noise0}, {"noise1", t2.noise1}};
    }
}

inline void from_json(const nlohmann::json& j, PriorStructure& p) {
    const std::string where = "prior";
    const auto s = json_util::get<std::string>(j, "structure", where);
    if (s == "type1") {
        json_util::check_keys(j, {"structure", "kernel", "noise_variance"}, where);
        p = TypeIPrior{json_util::get<ScalarKernelSpec>(j, "kernel", where),
                       json_util::get<double>(j, "noise_variance", where)};
    } else if (s == "type2") {
        json_util::check_keys(j, {"structure", "kernel", "noise0", "noise1"}, where);
        p = TypeIIPrior{json_util::get<LmcKernelSpec>(j, "kernel", where), json_util::get<double>(j, "noise0", where),
                        json_util::get<double>(j, "noise1", where)};
    } else {
        throw ConfigError(where + ".structure: expected 'type1' or 'type2', got '" + s + "'");
    }
    validate(p);
}

inline nlohmann::json view_to_json(const DatasetView& v) {
    std::vector<int> w(v.treatments.data(), v.treatments.data() + v.treatments.size());
    return nlohmann::json{{"features", json_util::matrix_to_json(v.features)},
                          {"treatments", w},
                          {"outcomes", json_util::to_array(v.outcomes)}};
}

inline DatasetView view_from_json(const nlohmann::json& j) {
    DatasetView v;
    v.features = json_util::matrix_from_json(j.at("features"), "training.features");
    const auto w = j.at("treatments").get<std::vector<int>>();
    v.treatments = Eigen::Map<const Eigen::VectorXi>(w.data(), static_cast<Index>(w.size()));
    v.outcomes = json_util::to_vector(j.at("outcomes").get<std::vector<double>>());
    if (v.treatments.size() != v.n() || v.outcomes.size() != v.n()) throw ShapeError("training data: ragged columns");
    return v;
}

}  // namespace mtgp

#endif  // MTGP_GP_HPP
