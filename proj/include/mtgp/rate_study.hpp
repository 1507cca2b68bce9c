#ifndef MTGP_RATE_STUDY_HPP
#define MTGP_RATE_STUDY_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtgp/errors.hpp"
#include "mtgp/estimators.hpp"
#include "mtgp/metrics.hpp"
#include "mtgp/parallel.hpp"
#include "mtgp/random.hpp"
#include "mtgp/synthgen.hpp"

namespace mtgp {

struct RateStudyConfig {
    GeneratorConfig generator;
    EstimatorSpec estimator = roster_entry("mtgp_info");
    std::vector<Index> sizes{50, 100, 200, 400};
    int replicates = 10;
    Index query_points = 500;
    std::uint64_t seed = 0;
    /// Smoothness/dimension for the oracle exponent; derived from GP-draw
    /// surfaces (alpha = nu, p = number of relevant dims) when absent.
    std::optional<double> alpha0, alpha1;
    double floor = 1e-10;  // medians below this at every n mark the study degenerate

    void validate() const {
        generator.validate();
        if (sizes.size() < 2) throw ConfigError("rate_study.sizes: need at least two sample sizes");
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            if (sizes[i] < 2) throw ConfigError("rate_study.sizes: every size must be >= 2");
            if (i > 0 && sizes[i] <= sizes[i - 1]) throw ConfigError("rate_study.sizes: must be strictly increasing");
        }
        if (replicates < 3) throw ConfigError("rate_study.replicates: need R >= 3");
        if (query_points < 500) throw ConfigError("rate_study.query_points: need at least 500 query points");
    }
};

struct RateStudyRow {
    Index n = 0;
    std::vector<double> pehe;            // successful replicates, in replicate order
    std::vector<std::uint64_t> seeds;    // all replicates
    double median = std::numeric_limits<double>::quiet_NaN();
    double q25 = std::numeric_limits<double>::quiet_NaN();
    double q75 = std::numeric_limits<double>::quiet_NaN();
};

struct RateStudyFailure {
    Index n = 0;
    int replicate = 0;
    std::string error;
};

struct RateStudyResult {
    std::string estimator_id;
    std::vector<RateStudyRow> rows;
    LogLogFit fit;
    std::optional<double> oracle_exponent;
    bool degenerate = false;
    std::vector<RateStudyFailure> failures;
    /// Per replicate: all (n, r, pehe) cells in order, NaN for failures.
    std::vector<std::vector<double>> cells;
};

inline std::optional<double> oracle_for(const RateStudyConfig& c) {
    std::optional<double> a[2] = {c.alpha0, c.alpha1};
    double p[2];
    for (int arm = 0; arm < 2; ++arm) {
        p[arm] = static_cast<double>(c.generator.resolved_dims(arm).size());
        if (!a[arm])
            if (const auto* g = std::get_if<GpDrawSpec>(arm == 0 ? &c.generator.surface0 : &c.generator.surface1))
                a[arm] = g->nu;
        if (!a[arm]) return std::nullopt;
    }
    return optimal_rate_oracle(*a[0], *a[1], p[0], p[1]);
}

/// Measures the out-of-sample PEHE decay of an estimator. The surfaces are
/// realized once from the generator config; each (n, replicate) cell draws a
/// fresh training set and a fresh query set from its own seed.
inline RateStudyResult run_rate_study(const RateStudyConfig& cfg, int threads = 1) {
    cfg.validate();
    const SyntheticModel model(cfg.generator);
    const std::size_t n_sizes = cfg.sizes.size();
    const auto reps = static_cast<std::size_t>(cfg.replicates);

    std::vector<double> values(n_sizes * reps, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> errors(n_sizes * reps);
    auto seed_of = [&](std::size_t s, std::size_t r) {
        return derive_seed(cfg.seed, {static_cast<std::uint64_t>(cfg.sizes[s]), static_cast<std::uint64_t>(r)});
    };

    parallel_for(n_sizes * reps, threads, [&](std::size_t cell) {
        const std::size_t s = cell / reps, r = cell % reps;
        const std::uint64_t seed = seed_of(s, r);
        try {
            const ObservationalDataset ds = model.sample(cfg.sizes[s], seed);
            const TrainedEstimator est = train_estimator(cfg.estimator, ds.view(), derive_seed(seed, {1}));
            const Eigen::MatrixXd xq = model.sample_features(cfg.query_points, derive_seed(seed, {2}));
            const double v = pehe(est.predict_ite(xq), model.true_ite(xq));
            if (!std::isfinite(v)) throw NumericalError("non-finite PEHE");
            values[cell] = v;
        } catch (const Error& e) {
            errors[cell] = e.what();
        }
    });

    RateStudyResult out;
    out.estimator_id = cfg.estimator.id;
    out.oracle_exponent = oracle_for(cfg);
    std::vector<double> xs, ys;
    bool all_floor = true;
    for (std::size_t s = 0; s < n_sizes; ++s) {
        RateStudyRow row;
        row.n = cfg.sizes[s];
        for (std::size_t r = 0; r < reps; ++r) {
            const std::size_t cell = s * reps + r;
            row.seeds.push_back(seed_of(s, r));
            if (errors[cell].empty())
                row.pehe.push_back(values[cell]);
            else
                out.failures.push_back({row.n, static_cast<int>(r), errors[cell]});
        }
        if (row.pehe.empty())
            throw NumericalError("rate study: every replicate failed at n=" + std::to_string(row.n));
        row.median = median(row.pehe);
        row.q25 = quantile(row.pehe, 0.25);
        row.q75 = quantile(row.pehe, 0.75);
        if (row.median >= cfg.floor) all_floor = false;
        xs.push_back(static_cast<double>(row.n));
        ys.push_back(std::max(row.median, std::numeric_limits<double>::min()));
        out.rows.push_back(std::move(row));
    }
    if (static_cast<double>(out.failures.size()) > 0.2 * static_cast<double>(n_sizes * reps))
        throw NumericalError("rate study: " + std::to_string(out.failures.size()) + " of " +
                             std::to_string(n_sizes * reps) + " replicates failed (more than 20%); first error: " +
                             out.failures.front().error);
    out.degenerate = all_floor;
    out.fit = fit_loglog(xs, ys);
    if (!std::isfinite(out.fit.slope)) throw NumericalError("rate study: non-finite slope");
    for (std::size_t r = 0; r < reps; ++r) {
        std::vector<double> row;
        for (std::size_t s = 0; s < n_sizes; ++s) row.push_back(values[s * reps + r]);
        out.cells.push_back(std::move(row));
    }
    return out;
}

inline nlohmann::json to_json_value(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json rate_study_to_json(const RateStudyResult& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"n", row.n},
                        {"median_pehe", row.median},
                        {"q25", row.q25},
                        {"q75", row.q75},
                        {"iqr", row.q75 - row.q25},
                        {"successes", row.pehe.size()},
                        {"pehe", row.pehe},
                        {"replicate_seeds", row.seeds}});
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : r.failures) failures.push_back({{"n", f.n}, {"replicate", f.replicate}, {"error", f.error}});
    return {{"estimator", r.estimator_id},
            {"sizes", [&] {
                 std::vector<Index> v;
                 for (const auto& row : r.rows) v.push_back(row.n);
                 return v;
             }()},
            {"rows", rows},
            {"slope", r.fit.slope},
            {"intercept", r.fit.intercept},
            {"slope_se", to_json_value(r.fit.slope_se)},
            {"oracle_exponent", r.oracle_exponent ? nlohmann::json(*r.oracle_exponent) : nlohmann::json(nullptr)},
            {"degenerate", r.degenerate},
            {"failures", failures}};
}

/// CSV of (n, replicate, pehe) for external plotting.
inline std::string rate_study_csv(const RateStudyResult& r) {
    std::string out = "n,replicate,pehe\n";
    for (std::size_t rep = 0; rep < r.cells.size(); ++rep)
        for (std::size_t s = 0; s < r.rows.size(); ++s) {
            const double v = r.cells[rep][s];
            out += std::to_string(r.rows[s].n) + "," + std::to_string(rep) + "," +
                   (std::isfinite(v) ? detail::format_double(v) : std::string("nan")) + "\n";
        }
    return out;
}

}  // namespace mtgp

#endif  // MTGP_RATE_STUDY_HPP
