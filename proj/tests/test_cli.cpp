#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "mtgp_test_cli";

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + MTGP_CLI_PATH + " " + args + " -q 2>" + (kWork / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const std::string& name, const json& j) {
    fs::create_directories(kWork);
    const fs::path p = kWork / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

json small_generator() {
    return {{"n", 60},
            {"d", 1},
            {"surface0", {{"type", "gp_draw"}, {"nu", 0.5}, {"length_scale", 0.25}}},
            {"surface1", {{"type", "gp_draw"}, {"nu", 2.5}, {"length_scale", 0.25}}},
            {"seed", 3}};
}

json cheap_eb() { return {{"smoothness_grid", {{0.5, 2.5}, {2.5, 2.5}}}, {"max_evaluations", 30}, {"warmstart_evaluations", 30}, {"folds", 4}}; }

}  // namespace

TEST(Cli, GenerateWritesAuditedCsv) {
    const auto cfg = write_config("gen.json", {{"generator", small_generator()}, {"seed", 1}});
    const fs::path out = kWork / "gen";
    ASSERT_EQ(run("generate -c " + cfg.string() + " -o " + out.string()), 0);
    const std::string csv = slurp(out / "dataset.csv");
    EXPECT_EQ(csv.rfind("# config_hash=", 0), 0u);
    EXPECT_NE(csv.find("x1,w,y,y_cf,ite"), std::string::npos);
    const json m = json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(m["outputs"], json({"dataset.csv"}));
    EXPECT_EQ(m["seed"], 1);
    EXPECT_TRUE(m["run_info"].contains("wall_seconds"));
}

TEST(Cli, SeedOverrideAndScale) {
    const auto cfg = write_config("gen2.json", {{"generator", small_generator()}, {"seed", 1}});
    ASSERT_EQ(run("generate -c " + cfg.string() + " -o " + (kWork / "s1").string()), 0);
    ASSERT_EQ(run("generate -c " + cfg.string() + " -o " + (kWork / "s2").string() + " --seed 2"), 0);
    ASSERT_EQ(run("generate -c " + cfg.string() + " -o " + (kWork / "s3").string() + " --scale 2"), 0);
    const std::string a = slurp(kWork / "s1" / "dataset.csv"), b = slurp(kWork / "s2" / "dataset.csv");
    EXPECT_NE(a, b);
    const std::string c = slurp(kWork / "s3" / "dataset.csv");
    EXPECT_EQ(std::count(c.begin(), c.end(), '\n'), 122);
}

TEST(Cli, ThreadPrecedence) {
    const auto cfg = write_config("gen3.json", {{"generator", small_generator()}, {"threads", 2}});
    auto threads = [&](const std::string& extra, const std::string& env) {
        const fs::path out = kWork / "t";
        EXPECT_EQ(run("generate -c " + cfg.string() + " -o " + out.string() + extra, env), 0);
        return json::parse(slurp(out / "manifest.json"))["run_info"]["threads"].get<int>();
    };
    EXPECT_EQ(threads("", ""), 2);
    EXPECT_EQ(threads("", "MTGP_THREADS=3"), 3);
    EXPECT_EQ(threads(" --threads 4", "MTGP_THREADS=3"), 4);
}

TEST(Cli, FitThenEvaluate) {
    const auto fit = write_config("fit.json", {{"data", {{"generator", small_generator()}}}, {"estimator", "mtgp_info"}, {"eb", cheap_eb()}, {"seed", 5}});
    ASSERT_EQ(run("fit -c " + fit.string() + " -o " + (kWork / "fit").string()), 0);
    const json model = json::parse(slurp(kWork / "fit" / "model.json"));
    EXPECT_EQ(model["format"], "mtgp-model");
    const json report = json::parse(slurp(kWork / "fit" / "fit_report.json"));
    for (const auto& c : report["candidates"])
        for (const auto& f : c["folds"])
            EXPECT_EQ(f["total"].get<double>(), f["factual_bias"].get<double>() + f["counterfactual_variance"].get<double>());

    json gen = small_generator();
    gen["n"] = 200;
    gen["assignment_seed"] = 77;
    const auto eval = write_config("eval.json", {{"model", "fit/model.json"}, {"data", {{"generator", gen}}}});
    ASSERT_EQ(run("evaluate -c " + eval.string() + " -o " + (kWork / "eval").string()), 0);
    const json e = json::parse(slurp(kWork / "eval" / "evaluation.json"));
    EXPECT_NEAR(e["sqrt_pehe"].get<double>(), std::sqrt(e["pehe"].get<double>()), 1e-12);
    EXPECT_GT(e["factual_rmse"].get<double>(), 0.0);
    EXPECT_TRUE(e.contains("expected_kl_risk"));

    gen["d"] = 2;
    const auto wrong = write_config("eval_d2.json", {{"model", "fit/model.json"}, {"data", {{"generator", gen}}}});
    EXPECT_EQ(run("evaluate -c " + wrong.string() + " -o " + (kWork / "eval2").string()), 2);
    EXPECT_NE(slurp(kWork / "stderr.txt").find("d=1"), std::string::npos);

    json bad = model;
    bad["version"] = 99;
    std::ofstream(kWork / "bad_model.json") << bad.dump();
    const auto old = write_config("eval_old.json", {{"model", "bad_model.json"}, {"data", {{"generator", small_generator()}}}});
    EXPECT_EQ(run("evaluate -c " + old.string() + " -o " + (kWork / "eval3").string()), 4);
}

TEST(Cli, FitRejectsNonPersistableEstimator) {
    const auto fit = write_config("fit_zero.json", {{"data", {{"generator", small_generator()}}}, {"estimator", "zero"}});
    EXPECT_EQ(run("fit -c " + fit.string() + " -o " + (kWork / "fz").string()), 2);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run("fit -c " + (kWork / "missing.json").string()), 4);
    std::ofstream(kWork / "broken.json") << "{ not json";
    EXPECT_EQ(run("fit -c " + (kWork / "broken.json").string()), 2);
    std::ofstream(kWork / "c.toml") << "seed = 1\n";
    EXPECT_EQ(run("fit -c " + (kWork / "c.toml").string()), 2);
    const auto typo = write_config("typo.json", {{"generator", small_generator()}, {"sead", 1}});
    EXPECT_EQ(run("generate -c " + typo.string() + " -o " + (kWork / "x").string()), 2);
    const auto ok = write_config("ok.json", {{"generator", small_generator()}});
    std::ofstream(kWork / "file") << "x";
    EXPECT_EQ(run("generate -c " + ok.string() + " -o " + (kWork / "file" / "sub").string()), 4);
    const auto csv = write_config("csv.json", {{"data", {{"path", "nowhere.csv"}}}});
    EXPECT_EQ(run("fit -c " + csv.string() + " -o " + (kWork / "x").string()), 4);
    EXPECT_EQ(run("generate -c " + ok.string() + " -o " + (kWork / "x").string(), "MTGP_THREADS=zero"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
}

TEST(Cli, FitFromCsvWithSplit) {
    const auto gen = write_config("gen_csv.json", {{"generator", small_generator()}});
    ASSERT_EQ(run("generate -c " + gen.string() + " -o " + (kWork / "csvdata").string()), 0);
    const auto fit = write_config("fit_csv.json", {{"data", {{"path", "csvdata/dataset.csv"}}},
                                                   {"estimator", "gp_type1_ml"},
                                                   {"eb", cheap_eb()},
                                                   {"split", {{"fractions", {0.8, 0.1, 0.1}}, {"folds", 4}}}});
    ASSERT_EQ(run("fit -c " + fit.string() + " -o " + (kWork / "fitcsv").string()), 0);
    const json report = json::parse(slurp(kWork / "fitcsv" / "fit_report.json"));
    EXPECT_EQ(report["data_split"]["train"].size(), 48u);
    EXPECT_EQ(report["structure"], "type1");
}

TEST(Cli, ShippedConfigsParse) {
    for (const auto& entry : fs::directory_iterator(MTGP_CONFIG_DIR)) {
        std::ifstream in(entry.path());
        json j;
        EXPECT_NO_THROW(j = json::parse(in)) << entry.path();
        EXPECT_TRUE(j.is_object());
    }
}
