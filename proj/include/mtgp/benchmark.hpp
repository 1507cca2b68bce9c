#ifndef MTGP_BENCHMARK_HPP
#define MTGP_BENCHMARK_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mtgp/dataset.hpp"
#include "mtgp/errors.hpp"
#include "mtgp/estimators.hpp"
#include "mtgp/metrics.hpp"
#include "mtgp/parallel.hpp"
#include "mtgp/random.hpp"
#include "mtgp/synthgen.hpp"

namespace mtgp {

using DataSource = std::variant<GeneratorConfig, IhdpAnalogConfig>;

struct BenchmarkConfig {
    DataSource source = IhdpAnalogConfig{};
    std::vector<EstimatorSpec> roster;
    int replicates = 50;
    SplitFractions split;
    int split_folds = 10;
    std::uint64_t seed = 0;

    void validate() const {
        if (replicates < 1) throw ConfigError("benchmark.replicates must be >= 1");
        if (roster.empty()) throw ConfigError("benchmark.roster must name at least one estimator");
        for (std::size_t i = 0; i < roster.size(); ++i)
            for (std::size_t j = i + 1; j < roster.size(); ++j)
                if (roster[i].id == roster[j].id) throw ConfigError("benchmark.roster: duplicate id '" + roster[i].id + "'");
    }
};

/// Generator with surfaces fixed by the benchmark seed (unless the source
/// pins a surface seed). Replicates resample covariates, assignment and noise.
inline SyntheticModel benchmark_model(const DataSource& source, std::uint64_t seed) {
    if (const auto* g = std::get_if<GeneratorConfig>(&source)) {
        GeneratorConfig c = *g;
        c.seed = seed;
        return SyntheticModel(c);
    }
    IhdpAnalogConfig c = std::get<IhdpAnalogConfig>(source);
    c.seed = seed;
    return SyntheticModel(ihdp_analog_config(c));
}

inline Index source_size(const DataSource& s) {
    return std::visit([](const auto& c) { return c.n; }, s);
}

struct EstimatorOutcome {
    double in_sample = std::numeric_limits<double>::quiet_NaN();   // sqrt PEHE on the training split
    double out_sample = std::numeric_limits<double>::quiet_NaN();  // sqrt PEHE on the test split
    std::string error;
    std::optional<SmoothnessCandidate> selected;  // GP estimators
};

struct BenchmarkResult {
    std::vector<std::string> ids;
    std::vector<std::uint64_t> replicate_seeds;
    /// outcomes[r][e] for replicate r and roster entry e.
    std::vector<std::vector<EstimatorOutcome>> outcomes;

    std::vector<double> values(std::size_t e, bool out_of_sample) const {
        std::vector<double> v;
        for (const auto& rep : outcomes) {
            const auto& o = rep[e];
            if (o.error.empty()) v.push_back(out_of_sample ? o.out_sample : o.in_sample);
        }
        return v;
    }

    std::size_t index_of(const std::string& id) const {
        for (std::size_t e = 0; e < ids.size(); ++e)
            if (ids[e] == id) return e;
        throw ConfigError("benchmark: no estimator '" + id + "' in the roster");
    }
};

/// Runs every roster entry on R replicates. Each replicate is split into
/// train/validation/test; estimators are fitted on the training part,
/// in-sample error is measured on it and out-of-sample error on the test
/// part. Failures are recorded per estimator and replicate.
inline BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, int threads = 1) {
    cfg.validate();
    const SyntheticModel model = benchmark_model(cfg.source, cfg.seed);
    const Index n = source_size(cfg.source);

    BenchmarkResult res;
    for (const auto& e : cfg.roster) res.ids.push_back(e.id);
    const auto reps = static_cast<std::size_t>(cfg.replicates);
    for (std::size_t r = 0; r < reps; ++r) res.replicate_seeds.push_back(derive_seed(cfg.seed, {0xbe, r}));
    res.outcomes.assign(reps, std::vector<EstimatorOutcome>(cfg.roster.size()));

    parallel_for(reps, threads, [&](std::size_t r) {
        const std::uint64_t seed = res.replicate_seeds[r];
        const ObservationalDataset ds = model.sample(n, seed);
        const DatasetView all = ds.view();
        const SplitPlan split = make_split(all, cfg.split, cfg.split_folds, derive_seed(seed, {1}));
        const DatasetView train = all.subset(split.train_idx);
        const ObservationalDataset test = ds.subset(split.test_idx);
        const Eigen::VectorXd ite_train = ds.subset(split.train_idx).true_ite().value();
        LikelihoodCache cache;
        for (std::size_t e = 0; e < cfg.roster.size(); ++e) {
            auto& o = res.outcomes[r][e];
            try {
                const TrainedEstimator est = train_estimator(cfg.roster[e], train, derive_seed(seed, {2}), &cache);
                o.in_sample = sqrt_pehe(est.predict_ite(train.features), ite_train);
                o.out_sample = test.n() > 0 ? sqrt_pehe(est.predict_ite(test.view().features), test.true_ite().value())
                                            : std::numeric_limits<double>::quiet_NaN();
                if (!est.reports().empty()) o.selected = est.reports().front().winner().smoothness;
            } catch (const Error& ex) {
                o.error = ex.what();
            }
        }
    });
    return res;
}

inline nlohmann::json interval_json(const MeanInterval& m) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"mean", num(m.mean)},
            {"sd", num(m.sd)},
            {"lower", m.lower ? nlohmann::json(*m.lower) : nlohmann::json(nullptr)},
            {"upper", m.upper ? nlohmann::json(*m.upper) : nlohmann::json(nullptr)},
            {"count", m.count}};
}

inline nlohmann::json benchmark_to_json(const BenchmarkResult& res) {
    nlohmann::json table = nlohmann::json::array();
    for (std::size_t e = 0; e < res.ids.size(); ++e) {
        nlohmann::json failures = nlohmann::json::array();
        for (std::size_t r = 0; r < res.outcomes.size(); ++r)
            if (!res.outcomes[r][e].error.empty())
                failures.push_back({{"replicate", r}, {"error", res.outcomes[r][e].error}});
        table.push_back({{"estimator", res.ids[e]},
                         {"in_sample_sqrt_pehe", interval_json(mean_interval(res.values(e, false)))},
                         {"out_of_sample_sqrt_pehe", interval_json(mean_interval(res.values(e, true)))},
                         {"failures", failures}});
    }
    nlohmann::json reps = nlohmann::json::array();
    for (std::size_t r = 0; r < res.outcomes.size(); ++r) {
        nlohmann::json row = nlohmann::json::object();
        for (std::size_t e = 0; e < res.ids.size(); ++e) {
            const auto& o = res.outcomes[r][e];
            nlohmann::json cell;
            if (o.error.empty()) {
                cell = {{"in_sample", o.in_sample},
                        {"out_of_sample", std::isfinite(o.out_sample) ? nlohmann::json(o.out_sample) : nlohmann::json(nullptr)}};
                if (o.selected) cell["selected_nu"] = {o.selected->nu0, o.selected->nu1};
            } else {
                cell = {{"error", o.error}};
            }
            row[res.ids[e]] = cell;
        }
        reps.push_back({{"replicate", r}, {"seed", res.replicate_seeds[r]}, {"results", row}});
    }
    return {{"table", table}, {"replicates", reps}};
}

/// Plain-text summary table.
inline std::string benchmark_table(const BenchmarkResult& res) {
    auto cell = [](const MeanInterval& m) {
        char buf[64];
        if (!std::isfinite(m.mean)) return std::string("n/a");
        if (m.lower)
            std::snprintf(buf, sizeof(buf), "%.3f +- %.3f", m.mean, *m.upper - m.mean);
        else
            std::snprintf(buf, sizeof(buf), "%.3f", m.mean);
        return std::string(buf);
    };
    std::string out = "estimator            in-sample sqrt(PEHE)   out-of-sample sqrt(PEHE)\n";
    for (std::size_t e = 0; e < res.ids.size(); ++e) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-20s %-22s %-22s\n", res.ids[e].c_str(),
                      cell(mean_interval(res.values(e, false))).c_str(), cell(mean_interval(res.values(e, true))).c_str());
        out += line;
    }
    return out;
}

}  // namespace mtgp

#endif  // MTGP_BENCHMARK_HPP
