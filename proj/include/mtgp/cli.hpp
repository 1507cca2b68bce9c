#ifndef MTGP_CLI_HPP
#define MTGP_CLI_HPP

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtgp/mtgp.hpp"

namespace mtgp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kArtifactFormat = "mtgp-model";
inline constexpr int kArtifactVersion = 1;

enum ExitCode : int { kOk = 0, kUnexpected = 1, kConfig = 2, kNumerical = 3, kIo = 4 };

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::optional<int> threads;
    double scale = 1.0;
    int verbosity = 1;
};

// ---------------------------------------------------------------------------
// Files

inline json read_config(const std::string& path) {
    if (path.empty()) throw ConfigError("--config is required");
    const fs::path p(path);
    if (p.extension() == ".toml")
        throw ConfigError(path + ": TOML configs are not supported by this build; use the equivalent JSON");
    std::ifstream in(p);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    try {
        json j = json::parse(in, nullptr, true, true);
        if (!j.is_object()) throw ConfigError(path + ": top level must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

inline void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Run context

class Run {
public:
    Run(std::string command, const Options& opt)
        : command_(std::move(command)), opt_(opt), start_(std::chrono::system_clock::now()) {
        config_ = read_config(opt.config_path);
        base_dir_ = fs::path(opt.config_path).parent_path();
        if (opt.seed) config_["seed"] = *opt.seed;
        seed_ = config_.contains("seed") ? json_util::get<std::uint64_t>(config_, "seed", "config") : 0;
        config_["seed"] = seed_;
        if (opt.scale != 1.0) config_["scale"] = opt.scale;
        if (!(opt.scale > 0.0) || !std::isfinite(opt.scale)) throw ConfigError("--scale must be a positive number");
        hash_ = json_util::config_hash(config_);
        int threads = config_.contains("threads") ? json_util::get<int>(config_, "threads", "config") : 1;
        threads = threads_from_env(threads);
        if (opt.threads) threads = *opt.threads;
        if (threads < 1) throw ConfigError("--threads must be >= 1");
        threads_ = threads;
        out_dir_ = opt.out;
        ensure_dir(out_dir_);
    }

    const json& config() const { return config_; }
    std::uint64_t seed() const { return seed_; }
    int threads() const { return threads_; }
    double scale() const { return opt_.scale; }
    const std::string& hash() const { return hash_; }
    std::string audit_comment() const { return "config_hash=" + hash_ + " seed=" + std::to_string(seed_); }

    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : base_dir_ / path;
    }

    /// Adds the audit fields to a JSON output and writes it.
    void emit_json(const std::string& name, json j) {
        j["config_hash"] = hash_;
        j["seed"] = seed_;
        write_json(out_dir_ / name, j);
        outputs_.push_back(name);
    }

    void emit_text(const std::string& name, const std::string& body) {
        write_text(out_dir_ / name, "# " + audit_comment() + "\n" + body);
        outputs_.push_back(name);
    }

    void emit_csv(const std::string& name, const ObservationalDataset& ds) {
        write_csv(ds, (out_dir_ / name).string(), audit_comment());
        outputs_.push_back(name);
    }

    void log(const std::string& msg) const {
        if (opt_.verbosity > 0) std::cerr << "[" << command_ << "] " << msg << "\n";
    }

    json& resolved() { return resolved_; }
    json& run_info() { return run_info_; }

    /// Writes manifest.json. Wall-clock data lives only under "run_info".
    void finish() {
        const auto end = std::chrono::system_clock::now();
        const std::time_t t = std::chrono::system_clock::to_time_t(start_);
        char stamp[32];
        std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
        run_info_["started_utc"] = stamp;
        run_info_["wall_seconds"] = std::chrono::duration<double>(end - start_).count();
        run_info_["threads"] = threads_;
        json manifest{{"command", command_},
                      {"version", kVersion},
                      {"config", config_},
                      {"config_hash", hash_},
                      {"seed", seed_},
                      {"outputs", outputs_},
                      {"run_info", run_info_}};
        if (!resolved_.is_null()) manifest["resolved"] = resolved_;
        write_json(out_dir_ / "manifest.json", manifest);
    }

private:
    std::string command_;
    Options opt_;
    json config_;
    json resolved_;
    json run_info_ = json::object();
    fs::path base_dir_, out_dir_;
    std::uint64_t seed_ = 0;
    int threads_ = 1;
    std::string hash_;
    std::vector<std::string> outputs_;
    std::chrono::system_clock::time_point start_;
};

// ---------------------------------------------------------------------------
// Config sections

inline EbConfig eb_base(const json& cfg) { return cfg.contains("eb") ? cfg.at("eb").get<EbConfig>() : EbConfig{}; }

inline EstimatorSpec estimator_spec(const json& cfg, const std::string& fallback) {
    const EbConfig base = eb_base(cfg);
    return cfg.contains("estimator") ? estimator_from_json(cfg.at("estimator"), base) : roster_entry(fallback, base);
}

/// Generator sources take the run seed unless they pin their own.
inline GeneratorConfig generator_from(const json& j, std::uint64_t seed) {
    json g = j;
    if (!g.contains("seed")) g["seed"] = seed;
    return g.get<GeneratorConfig>();
}

inline GeneratorConfig ihdp_from(const json& j, std::uint64_t seed) {
    auto c = j.get<IhdpAnalogConfig>();
    if (!j.contains("seed")) c.seed = seed;
    return ihdp_analog_config(c);
}

/// Exactly one of {"path"}, {"generator"}, {"ihdp_analog"}.
inline ObservationalDataset load_data(const Run& run, const json& data, json* resolved = nullptr) {
    const std::string where = "data";
    if (!data.is_object()) throw ConfigError(where + ": expected an object");
    json_util::check_keys(data, {"path", "generator", "ihdp_analog", "schema"}, where);
    const int sources = static_cast<int>(data.contains("path")) + static_cast<int>(data.contains("generator")) +
                        static_cast<int>(data.contains("ihdp_analog"));
    if (sources != 1) throw ConfigError(where + ": specify exactly one of 'path', 'generator', 'ihdp_analog'");
    if (data.contains("path")) {
        CsvSchema schema;
        if (data.contains("schema")) {
            const auto& s = data.at("schema");
            json_util::check_keys(s, {"feature_prefix", "treatment", "outcome", "counterfactual", "ite", "ignore_unknown_columns"},
                                  where + ".schema");
            schema.feature_prefix = json_util::get_or<std::string>(s, "feature_prefix", schema.feature_prefix, where);
            schema.treatment = json_util::get_or<std::string>(s, "treatment", schema.treatment, where);
            schema.outcome = json_util::get_or<std::string>(s, "outcome", schema.outcome, where);
            schema.counterfactual = json_util::get_or<std::string>(s, "counterfactual", schema.counterfactual, where);
            schema.ite = json_util::get_or<std::string>(s, "ite", schema.ite, where);
            schema.ignore_unknown_columns =
                json_util::get_or<bool>(s, "ignore_unknown_columns", schema.ignore_unknown_columns, where);
        }
        return load_csv(run.resolve(json_util::get<std::string>(data, "path", where)).string(), schema);
    }
    const GeneratorConfig g = data.contains("generator") ? generator_from(data.at("generator"), run.seed())
                                                         : ihdp_from(data.at("ihdp_analog"), run.seed());
    if (resolved) *resolved = g;
    return generate(g);
}

inline std::optional<SplitPlan> split_from(const json& cfg, const DatasetView& v, std::uint64_t seed, int* folds_out = nullptr) {
    if (!cfg.contains("split")) return std::nullopt;
    const auto& s = cfg.at("split");
    const std::string where = "split";
    json_util::check_keys(s, {"fractions", "folds"}, where);
    SplitFractions f;
    if (s.contains("fractions")) {
        const auto fr = json_util::get<std::vector<double>>(s, "fractions", where);
        if (fr.size() != 3) throw ConfigError(where + ".fractions: expected [train, valid, test]");
        f = {fr[0], fr[1], fr[2]};
    }
    const int folds = json_util::get_or<int>(s, "folds", 10, where);
    if (folds_out) *folds_out = folds;
    return make_split(v, f, folds, derive_seed(seed, {0x5b}));
}

// ---------------------------------------------------------------------------
// Commands

inline void cmd_generate(Run& run) {
    const json& cfg = run.config();
    json_util::check_keys(cfg, {"generator", "ihdp_analog", "seed", "scale", "threads"}, "config");
    if (cfg.contains("generator") == cfg.contains("ihdp_analog"))
        throw ConfigError("config: specify exactly one of 'generator', 'ihdp_analog'");
    GeneratorConfig g = cfg.contains("generator") ? generator_from(cfg.at("generator"), run.seed())
                                                  : ihdp_from(cfg.at("ihdp_analog"), run.seed());
    if (run.scale() != 1.0) g.n = std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(g.n) * run.scale())));
    run.resolved()["generator"] = g;
    const ObservationalDataset ds = generate(g);
    run.log("generated n=" + std::to_string(ds.n()) + " d=" + std::to_string(ds.d()) +
            ", treated=" + std::to_string(ds.view().count_arm(1)));
    run.emit_csv("dataset.csv", ds);
}

inline json artifact_json(const TrainedEstimator& est) {
    const FittedModel* m = est.model();
    if (m == nullptr) throw ConfigError("estimator '" + est.id() + "' has no joint GP posterior to persist");
    return {{"format", kArtifactFormat},
            {"version", kArtifactVersion},
            {"estimator", est.id()},
            {"prior", m->prior()},
            {"standardizer", {{"mean", json_util::to_array(est.standardizer().mean.transpose())},
                              {"scale", json_util::to_array(est.standardizer().scale.transpose())}}},
            {"training_data", view_to_json(m->training_data())}};
}

inline TrainedEstimator load_artifact(const fs::path& path) {
    const json j = read_json_file(path);
    if (!j.is_object() || j.value("format", "") != kArtifactFormat)
        throw IoError(path.string() + ": not a model artifact");
    if (!j.contains("version") || !j.at("version").is_number_integer() || j.at("version").get<int>() != kArtifactVersion)
        throw IoError(path.string() + ": artifact version mismatch (expected " + std::to_string(kArtifactVersion) + ")");
    try {
        Standardizer s;
        s.mean = json_util::to_vector(j.at("standardizer").at("mean").get<std::vector<double>>()).transpose();
        s.scale = json_util::to_vector(j.at("standardizer").at("scale").get<std::vector<double>>()).transpose();
        const PriorStructure prior = j.at("prior").get<PriorStructure>();
        const DatasetView train = view_from_json(j.at("training_data"));
        if (s.mean.size() != train.d() || s.scale.size() != train.d())
            throw ShapeError("standardizer and training data disagree on d");
        return restore_gp_estimator(j.at("estimator").get<std::string>(), s, prior, train);
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": malformed artifact: " + e.what());
    } catch (const ConfigError& e) {
        throw IoError(path.string() + ": malformed artifact: " + e.what());
    }
}

inline void cmd_fit(Run& run) {
    const json& cfg = run.config();
    json_util::check_keys(cfg, {"data", "estimator", "eb", "split", "seed", "scale", "threads"}, "config");
    if (!cfg.contains("data")) throw ConfigError("config: 'data' is required");
    json resolved_gen;
    const ObservationalDataset ds = load_data(run, cfg.at("data"), &resolved_gen);
    if (!resolved_gen.is_null()) run.resolved()["generator"] = resolved_gen;
    const EstimatorSpec spec = estimator_spec(cfg, "mtgp_info");
    if (spec.kind != EstimatorKind::GaussianProcess)
        throw ConfigError("fit: estimator '" + spec.id + "' is not a joint GP and cannot be persisted");
    run.resolved()["estimator"] = estimator_to_json(spec);

    const auto split = split_from(cfg, ds.view(), run.seed());
    const DatasetView train = split ? ds.view().subset(split->train_idx) : ds.view();
    run.log("fitting '" + spec.id + "' on n=" + std::to_string(train.n()));
    const TrainedEstimator est = train_estimator(spec, train, derive_seed(run.seed(), {0xf17}));
    const FitReport& report = est.reports().front();

    json rep = report_to_json(report);
    rep["estimator"] = spec.id;
    if (split) rep["data_split"] = *split;
    run.run_info()["candidate_seconds"] = report_timings_json(report);
    run.emit_json("fit_report.json", rep);
    run.emit_json("model.json", artifact_json(est));
    const auto& w = report.winner();
    run.log("selected nu=(" + detail::format_double(w.smoothness.nu0) + ", " + detail::format_double(w.smoothness.nu1) + ")");
}

inline void cmd_evaluate(Run& run) {
    const json& cfg = run.config();
    json_util::check_keys(cfg, {"model", "data", "seed", "scale", "threads"}, "config");
    if (!cfg.contains("model") || !cfg.contains("data")) throw ConfigError("config: 'model' and 'data' are required");
    const TrainedEstimator est = load_artifact(run.resolve(json_util::get<std::string>(cfg, "model", "config")));
    json resolved_gen;
    const ObservationalDataset ds = load_data(run, cfg.at("data"), &resolved_gen);
    if (!resolved_gen.is_null()) run.resolved()["generator"] = resolved_gen;

    const DatasetView& v = ds.view();
    const Eigen::VectorXd fitted = est.predict_factual(v.features, v.treatments);
    json out{{"estimator", est.id()},
             {"n", v.n()},
             {"d", v.d()},
             {"factual_rmse", std::sqrt((fitted - v.outcomes).squaredNorm() / static_cast<double>(v.n()))}};
    if (ds.true_ite()) {
        const PosteriorSummary post = est.model()->predict(est.standardizer().apply(v.features));
        const double p = pehe(post.ite_mean, *ds.true_ite());
        out["pehe"] = p;
        out["sqrt_pehe"] = std::sqrt(p);
        out["expected_kl_risk"] = expected_kl_risk(post, *ds.true_ite(), est.model()->noise_variance(0),
                                                   est.model()->noise_variance(1));
    }
    run.emit_json("evaluation.json", out);
    run.log("factual RMSE " + detail::format_double(out["factual_rmse"].get<double>()));
}

inline int scaled_count(int base, double scale) { return std::max(1, static_cast<int>(std::llround(base * scale))); }

inline void cmd_rate_study(Run& run) {
    const json& cfg = run.config();
    json_util::check_keys(cfg, {"generator", "estimator", "eb", "sizes", "replicates", "query_points", "oracle", "seed",
                                "scale", "threads"},
                          "config");
    if (!cfg.contains("generator")) throw ConfigError("config: 'generator' is required");
    RateStudyConfig rs;
    rs.generator = generator_from(cfg.at("generator"), run.seed());
    rs.estimator = estimator_spec(cfg, "mtgp_info");
    rs.sizes = json_util::get_or<std::vector<Index>>(cfg, "sizes", rs.sizes, "config");
    rs.replicates = scaled_count(json_util::get_or<int>(cfg, "replicates", rs.replicates, "config"), run.scale());
    rs.query_points = json_util::get_or<Index>(cfg, "query_points", rs.query_points, "config");
    rs.seed = run.seed();
    if (cfg.contains("oracle")) {
        const auto& o = cfg.at("oracle");
        json_util::check_keys(o, {"alpha0", "alpha1"}, "config.oracle");
        rs.alpha0 = json_util::get<double>(o, "alpha0", "config.oracle");
        rs.alpha1 = json_util::get<double>(o, "alpha1", "config.oracle");
    }
    run.resolved()["generator"] = rs.generator;
    run.resolved()["estimator"] = estimator_to_json(rs.estimator);
    run.resolved()["replicates"] = rs.replicates;
    run.log("rate study: " + std::to_string(rs.sizes.size()) + " sizes x " + std::to_string(rs.replicates) + " replicates");
    const RateStudyResult res = run_rate_study(rs, run.threads());
    run.emit_json("rate_study.json", rate_study_to_json(res));
    std::string csv = rate_study_csv(res);
    run.emit_text("rate_study.csv", csv);
    std::ostringstream txt;
    txt << "n      median_pehe   iqr\n";
    for (const auto& row : res.rows) {
        char line[96];
        std::snprintf(line, sizeof(line), "%-6lld %-13.6g %-13.6g\n", static_cast<long long>(row.n), row.median,
                      row.q75 - row.q25);
        txt << line;
    }
    txt << "slope " << detail::format_double(res.fit.slope);
    if (res.oracle_exponent) txt << " (oracle " << detail::format_double(*res.oracle_exponent) << ")";
    if (res.degenerate) txt << " [degenerate: PEHE at numerical floor]";
    txt << "\n";
    run.emit_text("rate_study.txt", txt.str());
    run.log("slope " + detail::format_double(res.fit.slope));
}

inline void cmd_benchmark(Run& run) {
    const json& cfg = run.config();
    json_util::check_keys(cfg, {"source", "roster", "eb", "replicates", "split", "seed", "scale", "threads"}, "config");
    BenchmarkConfig bc;
    if (cfg.contains("source")) {
        const auto& s = cfg.at("source");
        json_util::check_keys(s, {"generator", "ihdp_analog"}, "config.source");
        if (s.contains("generator") == s.contains("ihdp_analog"))
            throw ConfigError("config.source: specify exactly one of 'generator', 'ihdp_analog'");
        if (s.contains("generator")) {
            json g = s.at("generator");
            g["seed"] = run.seed();
            bc.source = g.get<GeneratorConfig>();
        } else {
            bc.source = s.at("ihdp_analog").get<IhdpAnalogConfig>();
        }
    }
    const EbConfig base = eb_base(cfg);
    if (cfg.contains("roster")) {
        const auto& r = cfg.at("roster");
        if (!r.is_array()) throw ConfigError("config.roster: expected an array");
        for (const auto& e : r) bc.roster.push_back(estimator_from_json(e, base));
    } else {
        for (const auto& id : default_roster()) bc.roster.push_back(roster_entry(id, base));
    }
    bc.replicates = scaled_count(json_util::get_or<int>(cfg, "replicates", bc.replicates, "config"), run.scale());
    if (cfg.contains("split")) {
        const auto& s = cfg.at("split");
        json_util::check_keys(s, {"fractions", "folds"}, "config.split");
        if (s.contains("fractions")) {
            const auto fr = json_util::get<std::vector<double>>(s, "fractions", "config.split");
            if (fr.size() != 3) throw ConfigError("config.split.fractions: expected [train, valid, test]");
            bc.split = {fr[0], fr[1], fr[2]};
        }
        bc.split_folds = json_util::get_or<int>(s, "folds", bc.split_folds, "config.split");
    }
    bc.seed = run.seed();
    json roster = json::array();
    for (const auto& e : bc.roster) roster.push_back(estimator_to_json(e));
    run.resolved()["roster"] = roster;
    run.resolved()["replicates"] = bc.replicates;
    run.resolved()["generator"] = benchmark_model(bc.source, bc.seed).config();
    run.log("benchmark: " + std::to_string(bc.roster.size()) + " estimators x " + std::to_string(bc.replicates) +
            " replicates on " + std::to_string(run.threads()) + " thread(s)");
    const BenchmarkResult res = run_benchmark(bc, run.threads());
    run.emit_json("benchmark.json", benchmark_to_json(res));
    run.emit_text("benchmark.txt", benchmark_table(res));
    run.log("\n" + benchmark_table(res));
}

// ---------------------------------------------------------------------------
// Entry point

inline int run_command(const std::string& name, const Options& opt) {
    try {
        Run run(name, opt);
        if (name == "generate")
            cmd_generate(run);
        else if (name == "fit")
            cmd_fit(run);
        else if (name == "evaluate")
            cmd_evaluate(run);
        else if (name == "rate-study")
            cmd_rate_study(run);
        else if (name == "benchmark")
            cmd_benchmark(run);
        else
            throw ConfigError("unknown subcommand '" + name + "'");
        run.finish();
        return kOk;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIo;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return kUnexpected;
    }
}

inline int main(int argc, char** argv) {
    CLI::App app{"Multi-task Gaussian process estimation of individualized treatment effects"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Options opt;
    std::uint64_t seed = 0;
    int threads = 0;
    bool quiet = false;

    const std::vector<std::pair<std::string, std::string>> commands{
        {"generate", "Draw a synthetic dataset and write it as CSV"},
        {"fit", "Select hyperparameters by empirical Bayes and persist the fitted model"},
        {"evaluate", "Score a persisted model on a dataset"},
        {"rate-study", "Measure the PEHE decay rate against the minimax oracle"},
        {"benchmark", "Run the estimator roster over Monte Carlo replicates"}};
    std::vector<CLI::App*> subs;
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", opt.config_path, "JSON config file")->required();
        sub->add_option("-s,--seed", seed, "Seed (overrides the config)");
        sub->add_option("-o,--out", opt.out, "Output directory")->capture_default_str();
        sub->add_option("-t,--threads", threads, std::string("Worker threads (overrides ") + kThreadsEnv + ")")
            ->check(CLI::PositiveNumber);
        sub->add_option("--scale", opt.scale, "Replicate-count multiplier")->capture_default_str();
        sub->add_flag("-q,--quiet", quiet, "No progress messages");
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    for (CLI::App* sub : subs) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed")) opt.seed = seed;
        if (sub->count("--threads")) opt.threads = threads;
        opt.verbosity = quiet ? 0 : 1;
        return run_command(sub->get_name(), opt);
    }
    return kConfig;
}

}  // namespace mtgp::cli

#endif  // MTGP_CLI_HPP
