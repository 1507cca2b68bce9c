#ifndef MTGP_ESTIMATORS_HPP
#define MTGP_ESTIMATORS_HPP

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtgp/dataset.hpp"
#include "mtgp/empirical_bayes.hpp"
#include "mtgp/errors.hpp"
#include "mtgp/gp.hpp"
#include "mtgp/json_util.hpp"
#include "mtgp/random.hpp"

namespace mtgp {

enum class EstimatorKind { GaussianProcess, IndependentGps, ZeroEffect, MeanEffect };

struct EstimatorSpec {
    std::string id;
    EstimatorKind kind = EstimatorKind::GaussianProcess;
    Structure structure = Structure::TypeII;
    EbConfig eb;
    bool standardize = true;
};

/// Built-in roster entries. `base` supplies the budgets, grid and fold count.
inline EstimatorSpec roster_entry(const std::string& id, const EbConfig& base = {}) {
    EstimatorSpec s;
    s.id = id;
    s.eb = base;
    if (id == "mtgp_info") {
        s.eb.criterion = Criterion::InformationBased;
    } else if (id == "mtgp_ml") {
        s.eb.criterion = Criterion::LikelihoodBased;
    } else if (id == "gp_type1_ml") {
        s.structure = Structure::TypeI;
        s.eb.criterion = Criterion::LikelihoodBased;
    } else if (id == "gp_type1_info") {
        s.structure = Structure::TypeI;
        s.eb.criterion = Criterion::InformationBased;
    } else if (id == "two_gps_ml") {
        s.kind = EstimatorKind::IndependentGps;
        s.structure = Structure::TypeI;
        s.eb.criterion = Criterion::LikelihoodBased;
        s.eb.audit_folds = false;
    } else if (id == "zero") {
        s.kind = EstimatorKind::ZeroEffect;
    } else if (id == "mean_effect") {
        s.kind = EstimatorKind::MeanEffect;
    } else {
        throw ConfigError("unknown estimator id '" + id +
                          "' (expected mtgp_info, mtgp_ml, gp_type1_ml, gp_type1_info, two_gps_ml, zero, mean_effect)");
    }
    return s;
}

inline std::vector<std::string> default_roster() {
    return {"mtgp_info", "mtgp_ml", "gp_type1_ml", "two_gps_ml", "zero", "mean_effect"};
}

namespace detail {

inline SplitPlan training_only_plan(Index n) {
    SplitPlan p;
    p.train_idx.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) p.train_idx[static_cast<std::size_t>(i)] = i;
    p.folds.assign(p.train_idx.size(), 0);
    p.num_folds = 1;
    return p;
}

}  // namespace detail

/// A fitted effect estimator.
class TrainedEstimator {
public:
    const std::string& id() const { return id_; }
    EstimatorKind kind() const { return kind_; }
    const std::vector<FitReport>& reports() const { return reports_; }
    const Standardizer& standardizer() const { return standardizer_; }
    /// The joint model (GaussianProcess kind only).
    const FittedModel* model() const { return models_.empty() ? nullptr : models_.front().get(); }

    Eigen::VectorXd predict_ite(const Eigen::MatrixXd& x) const {
        check_dim(x);
        switch (kind_) {
            case EstimatorKind::GaussianProcess:
                return models_[0]->predict(standardizer_.apply(x)).ite_mean;
            case EstimatorKind::IndependentGps: {
                const Eigen::MatrixXd z = standardizer_.apply(x);
                return models_[1]->predict(z).mean1 - models_[0]->predict(z).mean0;
            }
            default:
                return Eigen::VectorXd::Constant(x.rows(), constant_effect_);
        }
    }

    /// Posterior mean of the arm given by `arms` at each row.
    Eigen::VectorXd predict_factual(const Eigen::MatrixXd& x, const Eigen::VectorXi& arms) const {
        check_dim(x);
        if (arms.size() != x.rows()) throw ShapeError("predict_factual: arms length mismatch");
        Eigen::VectorXd m0, m1;
        if (kind_ == EstimatorKind::GaussianProcess) {
            const auto post = models_[0]->predict(standardizer_.apply(x));
            m0 = post.mean0;
            m1 = post.mean1;
        } else if (kind_ == EstimatorKind::IndependentGps) {
            const Eigen::MatrixXd z = standardizer_.apply(x);
            m0 = models_[0]->predict(z).mean0;
            m1 = models_[1]->predict(z).mean1;
        } else {
            m0 = Eigen::VectorXd::Constant(x.rows(), arm_mean_[0]);
            m1 = Eigen::VectorXd::Constant(x.rows(), arm_mean_[1]);
        }
        Eigen::VectorXd out(x.rows());
        for (Index i = 0; i < x.rows(); ++i) out(i) = arms(i) ? m1(i) : m0(i);
        return out;
    }

private:
    friend TrainedEstimator train_estimator(const EstimatorSpec&, const DatasetView&, std::uint64_t, LikelihoodCache*);
    friend TrainedEstimator restore_gp_estimator(std::string, const Standardizer&, const PriorStructure&,
                                                 const DatasetView&);

    void check_dim(const Eigen::MatrixXd& x) const {
        if (x.cols() != d_)
            throw ShapeError("estimator '" + id_ + "' was fitted with d=" + std::to_string(d_) + " features, input has d=" +
                             std::to_string(x.cols()));
    }

    std::string id_;
    EstimatorKind kind_ = EstimatorKind::ZeroEffect;
    Index d_ = 0;
    Standardizer standardizer_;
    std::vector<std::shared_ptr<const FittedModel>> models_;
    std::vector<FitReport> reports_;
    double constant_effect_ = 0.0;
    double arm_mean_[2] = {0.0, 0.0};
};

/// Fits `spec` on `train`. Fold assignment and any randomness derive from
/// `seed`. A cache shared between estimators fitted on the same data avoids
/// repeating identical likelihood fits; results do not depend on it.
inline TrainedEstimator train_estimator(const EstimatorSpec& spec, const DatasetView& train, std::uint64_t seed,
                                        LikelihoodCache* cache = nullptr) {
    if (train.n() < 1) throw ConfigError("train_estimator: empty training set");
    TrainedEstimator est;
    est.id_ = spec.id;
    est.kind_ = spec.kind;
    est.d_ = train.d();
    est.standardizer_ = spec.standardize ? Standardizer::fit(train.features) : Standardizer::identity(train.d());
    for (int arm = 0; arm < 2; ++arm) {
        double sum = 0.0;
        Index count = 0;
        for (Index i = 0; i < train.n(); ++i)
            if (train.treatments(i) == arm) sum += train.outcomes(i), ++count;
        est.arm_mean_[arm] = count > 0 ? sum / static_cast<double>(count) : train.outcomes.mean();
    }

    DatasetView z = train;
    z.features = est.standardizer_.apply(train.features);
    EbConfig eb = spec.eb;
    eb.seed = derive_seed(seed, {0xeb});

    switch (spec.kind) {
        case EstimatorKind::GaussianProcess: {
            // Audit folds are skipped silently when the data are too small.
            const bool information = eb.criterion == Criterion::InformationBased;
            const SplitPlan plan = information || (eb.audit_folds && z.n() >= eb.folds)
                                       ? make_folds(z, eb.folds, eb.seed)
                                       : detail::training_only_plan(z.n());
            FitReport report = select_hyperparameters(z, plan, eb, spec.structure, cache);
            est.models_.push_back(std::make_shared<const FittedModel>(report.selected, z));
            est.reports_.push_back(std::move(report));
            break;
        }
        case EstimatorKind::IndependentGps: {
            for (int arm = 0; arm < 2; ++arm) {
                const DatasetView sub = z.subset(z.arm_indices(arm));
                if (sub.n() < 1) throw ConfigError("independent GPs: arm " + std::to_string(arm) + " has no training data");
                EbConfig arm_eb = eb;
                arm_eb.criterion = Criterion::LikelihoodBased;
                arm_eb.audit_folds = false;
                FitReport report =
                    select_hyperparameters(sub, detail::training_only_plan(sub.n()), arm_eb, Structure::TypeI, cache);
                est.models_.push_back(std::make_shared<const FittedModel>(report.selected, sub));
                est.reports_.push_back(std::move(report));
            }
            break;
        }
        case EstimatorKind::ZeroEffect:
            est.constant_effect_ = 0.0;
            break;
        case EstimatorKind::MeanEffect:
            est.constant_effect_ = est.arm_mean_[1] - est.arm_mean_[0];
            break;
    }
    return est;
}

/// Rebuilds a GP estimator from persisted parts (prior, standardizer and
/// standardized training data). The factorization is recomputed.
inline TrainedEstimator restore_gp_estimator(std::string id, const Standardizer& s, const PriorStructure& prior,
                                             const DatasetView& standardized_train) {
    TrainedEstimator est;
    est.id_ = std::move(id);
    est.kind_ = EstimatorKind::GaussianProcess;
    est.d_ = standardized_train.d();
    est.standardizer_ = s;
    est.models_.push_back(std::make_shared<const FittedModel>(prior, standardized_train));
    return est;
}

// ---------------------------------------------------------------------------
// JSON

inline std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::GaussianProcess: return "gp";
        case EstimatorKind::IndependentGps: return "independent_gps";
        case EstimatorKind::ZeroEffect: return "zero";
        default: return "mean_effect";
    }
}

/// Accepts either a roster id string or an object
/// {"id", "structure", "criterion", "standardize", "eb": {...}}.
inline EstimatorSpec estimator_from_json(const nlohmann::json& j, const EbConfig& base) {
    if (j.is_string()) return roster_entry(j.get<std::string>(), base);
    const std::string where = "estimator";
    json_util::check_keys(j, {"id", "base", "structure", "criterion", "standardize", "eb"}, where);
    const std::string id = json_util::get<std::string>(j, "id", where);
    EstimatorSpec s;
    if (j.contains("base")) {
        s = roster_entry(json_util::get<std::string>(j, "base", where), base);
    } else {
        s.eb = base;
    }
    s.id = id;
    if (j.contains("eb")) {
        nlohmann::json merged = s.eb;
        merged.merge_patch(j.at("eb"));
        s.eb = merged.get<EbConfig>();
    }
    if (j.contains("structure")) s.structure = structure_from_string(json_util::get<std::string>(j, "structure", where));
    if (j.contains("criterion")) s.eb.criterion = criterion_from_string(json_util::get<std::string>(j, "criterion", where));
    s.standardize = json_util::get_or<bool>(j, "standardize", s.standardize, where);
    return s;
}

inline nlohmann::json estimator_to_json(const EstimatorSpec& s) {
    return {{"id", s.id},
            {"kind", to_string(s.kind)},
            {"structure", to_string(s.structure)},
            {"standardize", s.standardize},
            {"eb", s.eb}};
}

}  // namespace mtgp

#endif  // MTGP_ESTIMATORS_HPP
