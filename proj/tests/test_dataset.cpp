#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "mtgp/dataset.hpp"
#include "oracle.hpp"

using namespace mtgp;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "mtgp_test_dataset";
    fs::create_directories(dir);
    return dir / name;
}

void write(const fs::path& p, const std::string& body) {
    std::ofstream(p) << body;
}

ObservationalDataset small_dataset() {
    Eigen::MatrixXd x(4, 2);
    x << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8;
    Eigen::VectorXi w(4);
    w << 0, 1, 0, 1;
    Eigen::VectorXd y(4), ycf(4), ite(4);
    y << 1.0, 2.5, -0.25, 1e-17;
    ycf << 0.5, 1.0, 3.0, 2.0;
    ite << -0.5, 1.5, 3.25, -2.0;
    return {x, w, y, ycf, ite};
}

}  // namespace

TEST(Csv, RoundTripIsExact) {
    const auto ds = small_dataset();
    const fs::path p = temp_file("roundtrip.csv");
    write_csv(ds, p.string(), "config_hash=abc seed=1");
    const auto back = load_csv(p.string());
    EXPECT_TRUE(back.view() == ds.view());
    ASSERT_TRUE(back.counterfactuals() && back.true_ite());
    EXPECT_EQ(*back.counterfactuals(), *ds.counterfactuals());
    EXPECT_EQ(*back.true_ite(), *ds.true_ite());
}

TEST(Csv, ViewHidesCounterfactuals) {
    const auto ds = small_dataset();
    const auto plain = ds.without_hidden();
    EXPECT_FALSE(plain.counterfactuals().has_value());
    EXPECT_FALSE(plain.true_ite().has_value());
    EXPECT_TRUE(plain.view() == ds.view());
}

TEST(Csv, MissingFileIsIoError) {
    EXPECT_THROW(load_csv("/nonexistent/data.csv"), IoError);
}

TEST(Csv, BadTreatmentReportsRow) {
    const fs::path p = temp_file("bad_w.csv");
    write(p, "x1,w,y\n0.1,0,1.0\n0.2,2,1.0\n");
    try {
        load_csv(p.string());
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.row(), 2);
    }
}

TEST(Csv, NonNumericCellIsParseError) {
    const fs::path p = temp_file("bad_num.csv");
    write(p, "x1,w,y\n0.1,0,abc\n");
    try {
        load_csv(p.string());
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.column(), "y");
    }
}

TEST(Csv, UnknownColumnRejectedUnlessIgnored) {
    const fs::path p = temp_file("extra.csv");
    write(p, "x1,w,y,note\n0.1,0,1.0,3\n0.2,1,2.0,4\n");
    EXPECT_THROW(load_csv(p.string()), ParseError);
    CsvSchema s;
    s.ignore_unknown_columns = true;
    const auto ds = load_csv(p.string(), s);
    EXPECT_EQ(ds.n(), 2);
    EXPECT_EQ(ds.d(), 1);
}

TEST(Csv, MissingOutcomeColumn) {
    const fs::path p = temp_file("no_y.csv");
    write(p, "x1,w\n0.1,0\n");
    EXPECT_THROW(load_csv(p.string()), ParseError);
}

TEST(Dataset, RejectsNonBinaryTreatment) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
    Eigen::VectorXi w(2);
    w << 0, 3;
    EXPECT_THROW(ObservationalDataset(x, w, Eigen::VectorXd::Zero(2)), ValidationError);
}

TEST(Dataset, RejectsLengthMismatch) {
    EXPECT_THROW(ObservationalDataset(Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXi::Zero(2), Eigen::VectorXd::Zero(3)),
                 ShapeError);
}

TEST(Dataset, SubsetCarriesHiddenColumns) {
    const auto ds = small_dataset();
    const auto sub = ds.subset({3, 1});
    EXPECT_EQ(sub.n(), 2);
    EXPECT_DOUBLE_EQ((*sub.true_ite())(0), -2.0);
    EXPECT_DOUBLE_EQ((*sub.counterfactuals())(1), 1.0);
    EXPECT_EQ(sub.treatments()(0), 1);
}

class SplitTest : public ::testing::Test {
protected:
    void SetUp() override {
        std::mt19937_64 rng(3);
        view = oracle::random_view(rng, 103, 2);
    }
    DatasetView view;
};

TEST_F(SplitTest, PartitionsEveryRowOnce) {
    const SplitPlan p = make_split(view, {0.6, 0.2, 0.2}, 10, 17);
    std::multiset<Index> all;
    for (const auto* part : {&p.train_idx, &p.valid_idx, &p.test_idx}) all.insert(part->begin(), part->end());
    EXPECT_EQ(all.size(), 103u);
    EXPECT_EQ(std::set<Index>(all.begin(), all.end()).size(), 103u);
    EXPECT_EQ(p.train_idx.size(), 62u);
    EXPECT_EQ(p.valid_idx.size(), 21u);
    EXPECT_EQ(p.test_idx.size(), 20u);
}

TEST_F(SplitTest, FoldsAreBalancedPerArm) {
    const SplitPlan p = make_split(view, {0.6, 0.2, 0.2}, 10, 17);
    const DatasetView train = view.subset(p.train_idx);
    const Index treated = train.count_arm(1);
    std::vector<int> size(10), tr(10);
    for (std::size_t k = 0; k < p.folds.size(); ++k) {
        ++size[p.folds[k]];
        tr[p.folds[k]] += view.treatments(p.train_idx[k]);
    }
    const auto [smin, smax] = std::minmax_element(size.begin(), size.end());
    EXPECT_LE(*smax - *smin, 1);
    for (int j = 0; j < 10; ++j) {
        EXPECT_GE(tr[j], treated / 10);
        EXPECT_LE(tr[j], (treated + 9) / 10);
    }
}

TEST_F(SplitTest, TrainShareMatchesPopulationShare) {
    const SplitPlan p = make_split(view, {0.6, 0.2, 0.2}, 5, 4);
    const double pop = static_cast<double>(view.count_arm(1)) / static_cast<double>(view.n());
    const double train = static_cast<double>(view.subset(p.train_idx).count_arm(1)) / static_cast<double>(p.train_idx.size());
    EXPECT_NEAR(train, pop, 1.5 / static_cast<double>(p.train_idx.size()));
}

TEST_F(SplitTest, DeterministicInSeed) {
    EXPECT_EQ(make_split(view, {}, 10, 5), make_split(view, {}, 10, 5));
    EXPECT_NE(make_split(view, {}, 10, 5).train_idx, make_split(view, {}, 10, 6).train_idx);
}

TEST_F(SplitTest, FoldMembersComplement) {
    const SplitPlan p = make_split(view, {}, 4, 8);
    for (int j = 0; j < 4; ++j) {
        const auto in = p.fold_members(j), out = p.fold_complement(j);
        EXPECT_EQ(in.size() + out.size(), p.train_idx.size());
        std::set<Index> s(in.begin(), in.end());
        for (Index i : out) EXPECT_EQ(s.count(i), 0u);
    }
}

TEST_F(SplitTest, RejectsBadConfig) {
    EXPECT_THROW(make_split(view, {0.5, 0.2, 0.2}, 10, 1), ConfigError);
    EXPECT_THROW(make_split(view, {0.6, 0.2, 0.2}, 1, 1), ConfigError);
    EXPECT_THROW(make_split(view, {0.6, 0.2, 0.2}, 80, 1), ConfigError);
    EXPECT_THROW(make_folds(view.subset({0, 1, 2}), 4, 1), ConfigError);
}

TEST_F(SplitTest, MakeFoldsUsesAllRows) {
    const SplitPlan p = make_folds(view, 7, 2);
    EXPECT_EQ(p.train_idx.size(), 103u);
    EXPECT_TRUE(p.valid_idx.empty() && p.test_idx.empty());
    EXPECT_EQ(std::set<Index>(p.train_idx.begin(), p.train_idx.end()).size(), 103u);
}

TEST_F(SplitTest, JsonRoundTrip) {
    const SplitPlan p = make_split(view, {}, 10, 5);
    const nlohmann::json j = p;
    EXPECT_EQ(j.get<SplitPlan>(), p);
}

TEST(Standardizer, ZeroMeanUnitVariance) {
    Eigen::MatrixXd x(5, 3);
    x << 1, 2, 7, 2, 4, 7, 3, 6, 7, 4, 8, 7, 5, 10, 7;
    const auto s = Standardizer::fit(x);
    const Eigen::MatrixXd z = s.apply(x);
    for (int k = 0; k < 2; ++k) {
        EXPECT_NEAR(z.col(k).mean(), 0.0, 1e-12);
        EXPECT_NEAR(z.col(k).squaredNorm() / 5.0, 1.0, 1e-12);
    }
    EXPECT_DOUBLE_EQ(s.scale(2), 1.0);
    EXPECT_THROW(s.apply(Eigen::MatrixXd::Zero(2, 2)), ShapeError);
}
