#ifndef MTGP_EMPIRICAL_BAYES_HPP
#define MTGP_EMPIRICAL_BAYES_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mtgp/dataset.hpp"
#include "mtgp/errors.hpp"
#include "mtgp/gp.hpp"
#include "mtgp/json_util.hpp"
#include "mtgp/kernels.hpp"
#include "mtgp/optimize.hpp"

namespace mtgp {

// ---------------------------------------------------------------------------
// Factual bias / counterfactual variance objective

struct ObjectiveTerms {
    double factual_bias = 0.0;
    double counterfactual_variance = 0.0;

    double total() const { return factual_bias + counterfactual_variance; }
};

/// Sum over evaluation subjects of
///   factual bias:            (y_i - E[f_{w_i}(x_i) | D])^2
///   counterfactual variance: Var[f_{1-w_i}(x_i) | D] + noise_{1-w_i}
/// under a posterior already conditioned on the training data.
inline ObjectiveTerms information_objective(const FittedModel& model, const DatasetView& eval) {
    if (eval.n() < 1) throw ConfigError("information_objective: empty evaluation set");
    const PosteriorSummary post = model.predict(eval.features);
    ObjectiveTerms terms;
    for (Index i = 0; i < eval.n(); ++i) {
        const int w = eval.treatments(i);
        const double resid = eval.outcomes(i) - post.mean(w)(i);
        terms.factual_bias += resid * resid;
        terms.counterfactual_variance += post.var(1 - w)(i) + model.noise_variance(1 - w);
    }
    return terms;
}

inline ObjectiveTerms information_objective(const PriorStructure& prior, const DatasetView& train,
                                            const DatasetView& eval) {
    return information_objective(FittedModel(prior, train), eval);
}

struct FoldRow {
    int fold = 0;
    Index size = 0;
    double factual_bias = 0.0;
    double counterfactual_variance = 0.0;
    double total = 0.0;
};

struct CrossValidation {
    std::vector<FoldRow> folds;
    double risk = 0.0;  // sum of fold totals divided by the number of held-out subjects
};

/// J-fold evaluation of the information objective: each fold is held out in
/// turn, the posterior is fitted on the remaining training subjects and the
/// objective is summed over the held-out fold. The risk is the fold-size
/// weighted mean of per-subject fold risks. Prior covariances are computed
/// once over the training subjects and sliced per fold.
inline CrossValidation cross_validate(const PriorStructure& prior, const DatasetView& ds, const SplitPlan& split) {
    if (split.folds.size() != split.train_idx.size() || split.num_folds < 2)
        throw ConfigError("cross_validated_risk: split plan has no valid fold assignment");
    const bool type2 = structure_of(prior) == Structure::TypeII;
    const DatasetView s = ds.subset(split.train_idx);
    const PriorCovariance cov(prior, s.features);
    const double noise[2] = {noise_variance(prior, 0), noise_variance(prior, 1)};

    CrossValidation cv;
    double weighted = 0.0;
    Index held_out = 0;
    for (int j = 0; j < split.num_folds; ++j) {
        IndexList fit, hold;
        for (std::size_t k = 0; k < split.folds.size(); ++k) (split.folds[k] == j ? hold : fit).push_back(static_cast<Index>(k));
        if (hold.empty()) throw ConfigError("cross_validated_risk: fold " + std::to_string(j) + " is empty");
        if (fit.empty()) throw ConfigError("cross_validated_risk: fold " + std::to_string(j) + " leaves no training data");

        double sum[2] = {0.0, 0.0}, total = 0.0;
        Index count[2] = {0, 0};
        for (Index i : fit) {
            const int w = s.treatments(i);
            sum[w] += s.outcomes(i);
            ++count[w];
            total += s.outcomes(i);
        }
        if (type2 && (count[0] == 0 || count[1] == 0))
            throw ConfigError("cross_validated_risk: fitting without fold " + std::to_string(j) +
                              " leaves a treatment arm empty; Type-II fit is degenerate");
        const double global = total / static_cast<double>(fit.size());
        double offset[2] = {global, global};
        if (type2)
            for (int a = 0; a < 2; ++a) offset[a] = sum[a] / static_cast<double>(count[a]);

        const auto nf = static_cast<Index>(fit.size()), nh = static_cast<Index>(hold.size());
        Eigen::MatrixXd k(nf, nf);
        Eigen::VectorXd centered(nf);
        for (Index c = 0; c < nf; ++c) {
            const Index ic = fit[static_cast<std::size_t>(c)];
            const int wc = s.treatments(ic);
            centered(c) = s.outcomes(ic) - offset[wc];
            for (Index r = c; r < nf; ++r) {
                const Index ir = fit[static_cast<std::size_t>(r)];
                k(r, c) = k(c, r) = cov(ir, s.treatments(ir), ic, wc);
            }
            k(c, c) += noise[wc];
        }
        const auto chol = robust_cholesky(k);
        const Eigen::VectorXd alpha = chol.llt.solve(centered);

        Eigen::MatrixXd cross_f(nf, nh), cross_c(nf, nh);
        for (Index h = 0; h < nh; ++h) {
            const Index ih = hold[static_cast<std::size_t>(h)];
            const int wh = s.treatments(ih);
            for (Index r = 0; r < nf; ++r) {
                const Index ir = fit[static_cast<std::size_t>(r)];
                cross_f(r, h) = cov(ir, s.treatments(ir), ih, wh);
                cross_c(r, h) = cov(ir, s.treatments(ir), ih, 1 - wh);
            }
        }
        const Eigen::VectorXd mean_f = cross_f.transpose() * alpha;
        const Eigen::MatrixXd v = chol.llt.matrixL().solve(cross_c);

        ObjectiveTerms t;
        for (Index h = 0; h < nh; ++h) {
            const Index ih = hold[static_cast<std::size_t>(h)];
            const int wh = s.treatments(ih);
            const double resid = s.outcomes(ih) - (mean_f(h) + offset[wh]);
            t.factual_bias += resid * resid;
            const double var = std::max(cov(ih, 1 - wh, ih, 1 - wh) - v.col(h).squaredNorm(), 0.0);
            t.counterfactual_variance += var + noise[1 - wh];
        }
        cv.folds.push_back({j, nh, t.factual_bias, t.counterfactual_variance, t.total()});
        weighted += t.total();
        held_out += nh;
    }
    cv.risk = weighted / static_cast<double>(held_out);
    return cv;
}

inline double cross_validated_risk(const PriorStructure& prior, const DatasetView& ds, const SplitPlan& split) {
    return cross_validate(prior, ds, split).risk;
}

// ---------------------------------------------------------------------------
// Hyperparameter search space

enum class Criterion { InformationBased, LikelihoodBased };

/// How length-scales enter the continuous search: one per feature, one per
/// kernel, or per-feature only when d <= ard_max_dim.
enum class ArdMode { Auto, Full, Shared };

struct SmoothnessCandidate {
    double nu0 = 2.5;
    double nu1 = 2.5;  // ignored for Type-I

    friend auto operator<=>(const SmoothnessCandidate&, const SmoothnessCandidate&) = default;
};

struct EbConfig {
    Criterion criterion = Criterion::InformationBased;
    std::vector<SmoothnessCandidate> smoothness_grid;  // empty -> full grid for the structure
    int max_evaluations = 120;        // simplex budget of the selection objective, per candidate
    int warmstart_evaluations = 120;  // likelihood pre-fit budget (information criterion only)
    int refine_top = 3;               // candidates refined on the CV risk; 0 = all
    int folds = 10;
    std::uint64_t seed = 0;
    ArdMode ard = ArdMode::Auto;
    int ard_max_dim = 3;
    double epsilon = LmcKernelSpec::kDefaultEpsilon;
    bool audit_folds = true;  // fill the fold table for the likelihood criterion too
    KernelFamily family = KernelFamily::Matern;

    void validate() const {
        if (max_evaluations < 1) throw ConfigError("eb.max_evaluations must be >= 1");
        if (warmstart_evaluations < 0) throw ConfigError("eb.warmstart_evaluations must be >= 0");
        if (refine_top < 0) throw ConfigError("eb.refine_top must be >= 0");
        if (folds < 2) throw ConfigError("eb.folds must be >= 2");
        if (!(epsilon > 0.0)) throw ConfigError("eb.epsilon must be positive");
        for (const auto& c : smoothness_grid)
            if (family == KernelFamily::Matern &&
                (!ScalarKernelSpec::is_allowed_nu(c.nu0) || !ScalarKernelSpec::is_allowed_nu(c.nu1)))
                throw ConfigError("eb.smoothness_grid: values must be 0.5, 1.5 or 2.5");
    }
};

inline std::vector<SmoothnessCandidate> default_grid(Structure s) {
    const double levels[] = {0.5, 1.5, 2.5};
    std::vector<SmoothnessCandidate> grid;
    for (double a : levels) {
        if (s == Structure::TypeI) {
            grid.push_back({a, a});
            continue;
        }
        for (double b : levels) grid.push_back({a, b});
    }
    return grid;
}

/// Bijection between an unconstrained vector and a prior with fixed
/// smoothness. Scale parameters are log-multipliers of data-derived base
/// values, so the zero vector is the data-scale heuristic starting point;
/// cross-task correlations pass through tanh.
class PriorParameterization {
public:
    PriorParameterization(Structure structure, SmoothnessCandidate nu, const DatasetView& train, const EbConfig& cfg)
        : structure_(structure), nu_(nu), family_(cfg.family), epsilon_(cfg.epsilon) {
        const Index d = train.d();
        shared_ = cfg.ard == ArdMode::Shared || (cfg.ard == ArdMode::Auto && d > cfg.ard_max_dim);
        base_scales_.resize(d);
        for (Index k = 0; k < d; ++k) {
            const double mean = train.features.col(k).mean();
            const double sd = std::sqrt((train.features.col(k).array() - mean).square().mean());
            base_scales_(k) = (sd > 1e-12 ? sd : 1.0) * std::sqrt(static_cast<double>(d));
        }
        const double global_var = variance_of(train.outcomes, 1.0);
        for (int arm = 0; arm < 2; ++arm) {
            Eigen::VectorXd ys(train.count_arm(arm));
            Index k = 0;
            for (Index i = 0; i < train.n(); ++i)
                if (train.treatments(i) == arm) ys(k++) = train.outcomes(i);
            arm_var_[arm] = ys.size() >= 2 ? variance_of(ys, global_var) : global_var;
        }
        global_var_ = global_var;
    }

    Index length_params() const { return shared_ ? 1 : base_scales_.size(); }

    Index size() const {
        return structure_ == Structure::TypeII ? 2 * length_params() + 6 : length_params() + 3;
    }

    Eigen::VectorXd start() const { return Eigen::VectorXd::Zero(size()); }

    PriorStructure decode(const Eigen::VectorXd& theta) const {
        if (theta.size() != size()) throw ShapeError("parameter vector has wrong length");
        Index p = 0;
        auto scales = [&]() {
            Eigen::VectorXd ls(base_scales_.size());
            for (Index k = 0; k < ls.size(); ++k) ls(k) = base_scales_(k) * bounded_exp(theta(shared_ ? p : p + k));
            p += length_params();
            return ls;
        };
        if (structure_ == Structure::TypeII) {
            const Eigen::VectorXd l0 = scales();
            const Eigen::VectorXd l1 = scales();
            const double a00 = std::sqrt(arm_var_[0] * 0.9) * bounded_exp(theta(p++));
            const double b11 = arm_var_[1] * 0.9 * bounded_exp(theta(p++));
            const double rho_a = std::tanh(theta(p++));
            const double rho_b = std::tanh(theta(p++));
            const double noise0 = kNoiseFloor + 0.1 * arm_var_[0] * bounded_exp(theta(p++));
            const double noise1 = kNoiseFloor + 0.1 * arm_var_[1] * bounded_exp(theta(p++));
            return TypeIIPrior{LmcKernelSpec::from_correlations(make_kernel(nu_.nu0, l0), make_kernel(nu_.nu1, l1),
                                                                a00, b11, rho_a, rho_b, epsilon_),
                               noise0, noise1};
        }
        const Eigen::VectorXd lx = scales();
        Eigen::VectorXd ls(lx.size() + 1);
        ls << lx, bounded_exp(theta(p++));
        ScalarKernelSpec k = make_kernel(nu_.nu0, ls);
        k.variance = 0.9 * global_var_ * bounded_exp(theta(p++));
        const double noise = kNoiseFloor + 0.1 * global_var_ * bounded_exp(theta(p++));
        return TypeIPrior{k, noise};
    }

private:
    static double variance_of(const Eigen::VectorXd& v, double fallback) {
        if (v.size() < 2) return fallback;
        const double var = (v.array() - v.mean()).square().mean();
        return var > 1e-12 ? var : fallback;
    }

    static double bounded_exp(double u) { return std::exp(std::clamp(u, -12.0, 12.0)); }

    ScalarKernelSpec make_kernel(double nu, Eigen::VectorXd ls) const {
        ScalarKernelSpec k;
        k.family = family_;
        k.nu = family_ == KernelFamily::Matern ? nu : 0.0;
        k.length_scales = std::move(ls);
        k.variance = 1.0;
        return k;
    }

    Structure structure_;
    SmoothnessCandidate nu_;
    KernelFamily family_;
    double epsilon_;
    bool shared_ = false;
    Eigen::VectorXd base_scales_;
    double arm_var_[2] = {1.0, 1.0};
    double global_var_ = 1.0;
};

// ---------------------------------------------------------------------------
// Selection

struct CandidateResult {
    SmoothnessCandidate smoothness;
    bool ok = false;
    bool refined = false;  // information criterion: simplex run on the CV risk
    std::string error;
    PriorStructure prior;
    std::vector<FoldRow> folds;
    double cv_risk = std::numeric_limits<double>::quiet_NaN();
    double log_evidence = std::numeric_limits<double>::quiet_NaN();
    int evaluations = 0;
    double wall_seconds = 0.0;
};

struct FitReport {
    Structure structure = Structure::TypeII;
    Criterion criterion = Criterion::InformationBased;
    PriorStructure selected;
    std::size_t selected_index = 0;
    std::vector<CandidateResult> candidates;
    SplitPlan split;

    const CandidateResult& winner() const { return candidates.at(selected_index); }
};

/// Memo of likelihood-stage simplex runs, keyed by training data, structure,
/// smoothness, parameterization and budget. Lets a likelihood-EB fit and the
/// warm start of an information-EB fit on the same data share one run.
class LikelihoodCache {
public:
    std::optional<SimplexResult> find(const std::string& key) const {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto it = memo_.find(key);
        if (it == memo_.end()) return std::nullopt;
        return it->second;
    }
    void store(const std::string& key, const SimplexResult& r) {
        std::lock_guard<std::mutex> lock(mutex_);
        memo_.emplace(key, r);
    }

    static std::string key(const DatasetView& train, Structure s, const SmoothnessCandidate& nu, const EbConfig& c,
                           int budget) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto feed = [&h](const void* p, std::size_t bytes) {
            const auto* b = static_cast<const unsigned char*>(p);
            for (std::size_t i = 0; i < bytes; ++i) {
                h ^= b[i];
                h *= 0x100000001b3ULL;
            }
        };
        feed(train.features.data(), sizeof(double) * static_cast<std::size_t>(train.features.size()));
        feed(train.treatments.data(), sizeof(int) * static_cast<std::size_t>(train.treatments.size()));
        feed(train.outcomes.data(), sizeof(double) * static_cast<std::size_t>(train.outcomes.size()));
        const double params[] = {static_cast<double>(s), nu.nu0, nu.nu1, static_cast<double>(c.ard),
                                 static_cast<double>(c.ard_max_dim), c.epsilon, static_cast<double>(c.family),
                                 static_cast<double>(budget), static_cast<double>(train.n()),
                                 static_cast<double>(train.d())};
        feed(params, sizeof(params));
        return json_util::hex64(h);
    }

private:
    mutable std::mutex mutex_;
    std::map<std::string, SimplexResult> memo_;
};

/// Empirical Bayes over a discrete smoothness grid.
///
/// Candidates are visited in lexicographic (nu0, nu1) order. For each one the
/// continuous parameters are first fitted by Nelder-Mead on the evidence of
/// the training subjects. Under the likelihood criterion that fit is final
/// and the winner maximizes the evidence. Under the information criterion the
/// cross-validated factual-bias + counterfactual-variance risk is evaluated at
/// every likelihood fit, the `refine_top` candidates with the lowest risk are
/// refined by Nelder-Mead on that risk, and the winner minimizes it. Ties go
/// to the earliest candidate.
inline FitReport select_hyperparameters(const DatasetView& ds, const SplitPlan& split, const EbConfig& config,
                                        Structure structure, LikelihoodCache* cache = nullptr) {
    config.validate();
    if (split.train_idx.empty()) throw ConfigError("select_hyperparameters: empty training set");
    std::vector<SmoothnessCandidate> grid = config.smoothness_grid.empty() ? default_grid(structure)
                                                                           : config.smoothness_grid;
    if (structure == Structure::TypeI)
        for (auto& c : grid) c.nu1 = c.nu0;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const DatasetView train = ds.subset(split.train_idx);
    const bool information = config.criterion == Criterion::InformationBased;

    FitReport report;
    report.structure = structure;
    report.criterion = config.criterion;
    report.split = split;

    using clock = std::chrono::steady_clock;
    std::vector<std::optional<PriorParameterization>> params(grid.size());
    std::vector<Eigen::VectorXd> thetas(grid.size());

    // Likelihood stage, plus the CV risk at its optimum.
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto t0 = clock::now();
        CandidateResult cand;
        cand.smoothness = grid[k];
        try {
            params[k].emplace(structure, grid[k], train, config);
            const PriorParameterization& param = *params[k];
            Eigen::VectorXd theta = param.start();
            const int budget = information ? config.warmstart_evaluations : config.max_evaluations;
            if (budget > 0) {
                const std::string key = cache ? LikelihoodCache::key(train, structure, grid[k], config, budget) : "";
                std::optional<SimplexResult> ml = cache ? cache->find(key) : std::nullopt;
                if (!ml) {
                    auto neg_evidence = [&](const Eigen::VectorXd& th) {
                        return -log_marginal_likelihood(param.decode(th), train);
                    };
                    ml = nelder_mead(neg_evidence, theta, 0.5, budget);
                    if (cache) cache->store(key, *ml);
                }
                cand.evaluations += ml->evaluations;
                if (ml->value < kFailedObjective) theta = ml->argmin;
            }
            thetas[k] = theta;
            if (information) {
                cand.cv_risk = cross_validated_risk(param.decode(theta), ds, split);
                ++cand.evaluations;
            }
            cand.ok = true;
        } catch (const Error& e) {
            cand.ok = false;
            cand.error = e.what();
        }
        cand.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
        report.candidates.push_back(std::move(cand));
    }

    // Refinement on the CV risk.
    if (information) {
        std::vector<std::size_t> order;
        for (std::size_t k = 0; k < grid.size(); ++k)
            if (report.candidates[k].ok && std::isfinite(report.candidates[k].cv_risk)) order.push_back(k);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return report.candidates[a].cv_risk < report.candidates[b].cv_risk;
        });
        if (config.refine_top > 0 && order.size() > static_cast<std::size_t>(config.refine_top))
            order.resize(static_cast<std::size_t>(config.refine_top));
        std::sort(order.begin(), order.end());
        for (std::size_t k : order) {
            const auto t0 = clock::now();
            auto& cand = report.candidates[k];
            const PriorParameterization& param = *params[k];
            auto cv_objective = [&](const Eigen::VectorXd& th) { return cross_validated_risk(param.decode(th), ds, split); };
            const SimplexResult cv = nelder_mead(cv_objective, thetas[k], 0.5, config.max_evaluations);
            cand.evaluations += cv.evaluations;
            if (cv.value < kFailedObjective) thetas[k] = cv.argmin;
            cand.refined = true;
            cand.wall_seconds += std::chrono::duration<double>(clock::now() - t0).count();
        }
    }

    // Final bookkeeping at each candidate's chosen parameters.
    for (std::size_t k = 0; k < grid.size(); ++k) {
        auto& cand = report.candidates[k];
        if (!cand.ok) continue;
        const auto t0 = clock::now();
        try {
            cand.prior = params[k]->decode(thetas[k]);
            cand.log_evidence = log_marginal_likelihood(cand.prior, train);
            if (information) {
                const CrossValidation cv = cross_validate(cand.prior, ds, split);
                cand.folds = cv.folds;
                cand.cv_risk = cv.risk;
            } else if (config.audit_folds) {
                try {
                    const CrossValidation cv = cross_validate(cand.prior, ds, split);
                    cand.folds = cv.folds;
                    cand.cv_risk = cv.risk;
                } catch (const Error&) {
                    // audit only; the evidence decides
                }
            }
            cand.ok = std::isfinite(information ? cand.cv_risk : cand.log_evidence);
            if (!cand.ok) cand.error = "non-finite selection objective";
        } catch (const Error& e) {
            cand.ok = false;
            cand.error = e.what();
        }
        cand.wall_seconds += std::chrono::duration<double>(clock::now() - t0).count();
    }

    bool found = false;
    for (std::size_t k = 0; k < report.candidates.size(); ++k) {
        const auto& c = report.candidates[k];
        if (!c.ok) continue;
        const auto& best = report.candidates[report.selected_index];
        const bool better = !found || (information ? c.cv_risk < best.cv_risk : c.log_evidence > best.log_evidence);
        if (better) {
            report.selected_index = k;
            found = true;
        }
    }
    if (!found) {
        std::string msg = "select_hyperparameters: every candidate failed:";
        for (const auto& c : report.candidates)
            msg += " [nu=(" + std::to_string(c.smoothness.nu0) + "," + std::to_string(c.smoothness.nu1) + "): " + c.error + "]";
        throw NumericalError(msg);
    }
    report.selected = report.candidates[report.selected_index].prior;
    return report;
}

// ---------------------------------------------------------------------------
// JSON

inline std::string to_string(Criterion c) { return c == Criterion::InformationBased ? "information" : "likelihood"; }
inline std::string to_string(Structure s) { return s == Structure::TypeI ? "type1" : "type2"; }

inline Criterion criterion_from_string(const std::string& s) {
    if (s == "information") return Criterion::InformationBased;
    if (s == "likelihood") return Criterion::LikelihoodBased;
    throw ConfigError("unknown criterion '" + s + "' (expected 'information' or 'likelihood')");
}

inline Structure structure_from_string(const std::string& s) {
    if (s == "type1") return Structure::TypeI;
    if (s == "type2") return Structure::TypeII;
    throw ConfigError("unknown structure '" + s + "' (expected 'type1' or 'type2')");
}

inline void to_json(nlohmann::json& j, const EbConfig& c) {
    nlohmann::json grid = nullptr;  // null: default grid for the structure
    for (const auto& g : c.smoothness_grid) grid.push_back({g.nu0, g.nu1});
    j = nlohmann::json{{"criterion", to_string(c.criterion)},
                       {"smoothness_grid", grid},
                       {"max_evaluations", c.max_evaluations},
                       {"warmstart_evaluations", c.warmstart_evaluations},
                       {"refine_top", c.refine_top},
                       {"folds", c.folds},
                       {"seed", c.seed},
                       {"ard", c.ard == ArdMode::Auto ? "auto" : c.ard == ArdMode::Full ? "full" : "shared"},
                       {"ard_max_dim", c.ard_max_dim},
                       {"epsilon", c.epsilon},
                       {"audit_folds", c.audit_folds},
                       {"family", c.family == KernelFamily::Matern ? "matern" : "squared_exponential"}};
}

inline void from_json(const nlohmann::json& j, EbConfig& c) {
    const std::string where = "eb";
    json_util::check_keys(j,
                          {"criterion", "smoothness_grid", "max_evaluations", "warmstart_evaluations", "refine_top", "folds", "seed",
                           "ard", "ard_max_dim", "epsilon", "audit_folds", "family"},
                          where);
    EbConfig d;
    c.criterion = criterion_from_string(json_util::get_or<std::string>(j, "criterion", to_string(d.criterion), where));
    c.smoothness_grid.clear();
    if (j.contains("smoothness_grid") && !j.at("smoothness_grid").is_null()) {
        for (const auto& g : j.at("smoothness_grid")) {
            if (g.is_number()) {
                c.smoothness_grid.push_back({g.get<double>(), g.get<double>()});
            } else if (g.is_array() && g.size() == 2) {
                c.smoothness_grid.push_back({g[0].get<double>(), g[1].get<double>()});
            } else {
                throw ConfigError(where + ".smoothness_grid: entries must be numbers or [nu0, nu1] pairs");
            }
        }
        if (c.smoothness_grid.empty()) throw ConfigError(where + ".smoothness_grid: must be nonempty when given");
    }
    c.max_evaluations = json_util::get_or<int>(j, "max_evaluations", d.max_evaluations, where);
    c.warmstart_evaluations = json_util::get_or<int>(j, "warmstart_evaluations", d.warmstart_evaluations, where);
    c.refine_top = json_util::get_or<int>(j, "refine_top", d.refine_top, where);
    c.folds = json_util::get_or<int>(j, "folds", d.folds, where);
    c.seed = json_util::get_or<std::uint64_t>(j, "seed", d.seed, where);
    const auto ard = json_util::get_or<std::string>(j, "ard", "auto", where);
    if (ard == "auto")
        c.ard = ArdMode::Auto;
    else if (ard == "full")
        c.ard = ArdMode::Full;
    else if (ard == "shared")
        c.ard = ArdMode::Shared;
    else
        throw ConfigError(where + ".ard: expected auto, full or shared");
    c.ard_max_dim = json_util::get_or<int>(j, "ard_max_dim", d.ard_max_dim, where);
    c.epsilon = json_util::get_or<double>(j, "epsilon", d.epsilon, where);
    c.audit_folds = json_util::get_or<bool>(j, "audit_folds", d.audit_folds, where);
    const auto family = json_util::get_or<std::string>(j, "family", "matern", where);
    if (family == "matern")
        c.family = KernelFamily::Matern;
    else if (family == "squared_exponential")
        c.family = KernelFamily::SquaredExponential;
    else
        throw ConfigError(where + ".family: unknown kernel family '" + family + "'");
    c.validate();
}

/// Serializes everything except wall-clock timings, which are reported
/// separately so that the report is reproducible byte for byte.
inline nlohmann::json report_to_json(const FitReport& r) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : r.candidates) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& f : c.folds)
            rows.push_back({{"fold", f.fold},
                            {"size", f.size},
                            {"factual_bias", f.factual_bias},
                            {"counterfactual_variance", f.counterfactual_variance},
                            {"total", f.total}});
        nlohmann::json cj{{"nu0", c.smoothness.nu0}, {"nu1", c.smoothness.nu1}, {"ok", c.ok},
                          {"refined", c.refined},   {"evaluations", c.evaluations}, {"folds", rows}};
        cj["cv_risk"] = std::isfinite(c.cv_risk) ? nlohmann::json(c.cv_risk) : nlohmann::json(nullptr);
        cj["log_evidence"] = std::isfinite(c.log_evidence) ? nlohmann::json(c.log_evidence) : nlohmann::json(nullptr);
        if (c.ok) cj["prior"] = c.prior;
        if (!c.error.empty()) cj["error"] = c.error;
        cands.push_back(std::move(cj));
    }
    return nlohmann::json{{"structure", to_string(r.structure)},
                          {"criterion", to_string(r.criterion)},
                          {"selected_index", r.selected_index},
                          {"selected", r.selected},
                          {"candidates", cands},
                          {"split", r.split}};
}

inline nlohmann::json report_timings_json(const FitReport& r) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& c : r.candidates)
        t.push_back({{"nu0", c.smoothness.nu0}, {"nu1", c.smoothness.nu1}, {"wall_seconds", c.wall_seconds}});
    return t;
}

}  // namespace mtgp

#endif  // MTGP_EMPIRICAL_BAYES_HPP
