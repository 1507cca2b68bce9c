#ifndef MTGP_DATASET_HPP
#define MTGP_DATASET_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mtgp/errors.hpp"

namespace mtgp {

using Index = Eigen::Index;
using IndexList = std::vector<Index>;

/// The part of an observational dataset an estimator is allowed to see:
/// covariates, binary treatment assignment and the factual outcome.
struct DatasetView {
    Eigen::MatrixXd features;    // n x d
    Eigen::VectorXi treatments;  // n, entries in {0,1}
    Eigen::VectorXd outcomes;    // n, factual outcome Y^(w_i)

    Index n() const { return features.rows(); }
    Index d() const { return features.cols(); }

    Index count_arm(int arm) const { return (treatments.array() == arm).count(); }

    DatasetView subset(const IndexList& idx) const {
        DatasetView out;
        out.features.resize(static_cast<Index>(idx.size()), d());
        out.treatments.resize(static_cast<Index>(idx.size()));
        out.outcomes.resize(static_cast<Index>(idx.size()));
        for (Index k = 0; k < static_cast<Index>(idx.size()); ++k) {
            out.features.row(k) = features.row(idx[k]);
            out.treatments(k) = treatments(idx[k]);
            out.outcomes(k) = outcomes(idx[k]);
        }
        return out;
    }

    /// Indices of the subjects assigned to `arm`, in dataset order.
    IndexList arm_indices(int arm) const {
        IndexList out;
        for (Index i = 0; i < n(); ++i)
            if (treatments(i) == arm) out.push_back(i);
        return out;
    }

    friend bool operator==(const DatasetView& a, const DatasetView& b) {
        return a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
               a.features == b.features && a.treatments == b.treatments && a.outcomes == b.outcomes;
    }
};

/// Observational data (X_i, w_i, Y_i^(w_i)); synthetic datasets additionally
/// carry the counterfactual outcome and the true effect, which are never
/// exposed through `view()`.
class ObservationalDataset {
public:
    ObservationalDataset(Eigen::MatrixXd features, Eigen::VectorXi treatments, Eigen::VectorXd outcomes,
                         std::optional<Eigen::VectorXd> counterfactuals = std::nullopt,
                         std::optional<Eigen::VectorXd> true_ite = std::nullopt) {
        view_.features = std::move(features);
        view_.treatments = std::move(treatments);
        view_.outcomes = std::move(outcomes);
        counterfactuals_ = std::move(counterfactuals);
        true_ite_ = std::move(true_ite);
        validate();
    }

    Index n() const { return view_.n(); }
    Index d() const { return view_.d(); }

    const DatasetView& view() const { return view_; }
    const Eigen::MatrixXd& features() const { return view_.features; }
    const Eigen::VectorXi& treatments() const { return view_.treatments; }
    const Eigen::VectorXd& outcomes() const { return view_.outcomes; }
    const std::optional<Eigen::VectorXd>& counterfactuals() const { return counterfactuals_; }
    const std::optional<Eigen::VectorXd>& true_ite() const { return true_ite_; }

    ObservationalDataset without_hidden() const { return {view_.features, view_.treatments, view_.outcomes}; }

    ObservationalDataset subset(const IndexList& idx) const {
        DatasetView v = view_.subset(idx);
        auto pick = [&](const std::optional<Eigen::VectorXd>& src) -> std::optional<Eigen::VectorXd> {
            if (!src) return std::nullopt;
            Eigen::VectorXd out(static_cast<Index>(idx.size()));
            for (Index k = 0; k < out.size(); ++k) out(k) = (*src)(idx[k]);
            return out;
        };
        return {std::move(v.features), std::move(v.treatments), std::move(v.outcomes), pick(counterfactuals_),
                pick(true_ite_)};
    }

private:
    void validate() const {
        const Index n = view_.features.rows();
        if (n < 1 || view_.features.cols() < 1)
            throw ValidationError("dataset needs n >= 1 and d >= 1 (got n=" + std::to_string(n) +
                                  ", d=" + std::to_string(view_.features.cols()) + ")");
        if (view_.treatments.size() != n || view_.outcomes.size() != n)
            throw ShapeError("treatments/outcomes length must equal the number of feature rows");
        for (Index i = 0; i < n; ++i) {
            if (view_.treatments(i) != 0 && view_.treatments(i) != 1)
                throw ValidationError("row " + std::to_string(i + 1) + ": treatment must be 0 or 1, got " +
                                          std::to_string(view_.treatments(i)),
                                      static_cast<long>(i + 1));
        }
        if (!view_.features.allFinite() || !view_.outcomes.allFinite())
            throw ValidationError("features and outcomes must be finite");
        for (const auto* hidden : {&counterfactuals_, &true_ite_}) {
            if (!*hidden) continue;
            if ((*hidden)->size() != n) throw ShapeError("hidden columns must have length n");
            if (!(*hidden)->allFinite()) throw ValidationError("hidden columns must be finite");
        }
    }

    DatasetView view_;
    std::optional<Eigen::VectorXd> counterfactuals_;
    std::optional<Eigen::VectorXd> true_ite_;
};

// ---------------------------------------------------------------------------
// CSV

/// Column naming rule for the tabular format.
struct CsvSchema {
    std::string feature_prefix = "x";
    std::string treatment = "w";
    std::string outcome = "y";
    std::string counterfactual = "y_cf";
    std::string ite = "ite";
    bool ignore_unknown_columns = false;
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

/// Shortest representation that parses back to the identical double.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

/// Reads a dataset from CSV. Lines starting with '#' are comments. The header
/// must name x1..xd, w and y; y_cf and ite are optional.
inline ObservationalDataset load_csv(const std::string& path, const CsvSchema& schema = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV file '" + path + "'");

    std::string line;
    std::vector<std::string> header;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        for (auto cell : detail::split_commas(t)) header.emplace_back(detail::trim(cell));
        break;
    }
    if (header.empty()) throw ParseError("'" + path + "': missing header row");

    // Map header columns onto roles.
    constexpr int kFeature = 0, kTreatment = 1, kOutcome = 2, kCounterfactual = 3, kIte = 4, kIgnored = 5;
    std::vector<int> role(header.size(), kIgnored);
    std::vector<Index> feature_slot(header.size(), -1);
    Index d = 0;
    int seen[5] = {0, 0, 0, 0, 0};
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& name = header[c];
        if (name == schema.treatment) {
            role[c] = kTreatment;
        } else if (name == schema.outcome) {
            role[c] = kOutcome;
        } else if (name == schema.counterfactual) {
            role[c] = kCounterfactual;
        } else if (name == schema.ite) {
            role[c] = kIte;
        } else if (name.size() > schema.feature_prefix.size() && name.rfind(schema.feature_prefix, 0) == 0) {
            const std::string_view digits = std::string_view(name).substr(schema.feature_prefix.size());
            long k = 0;
            const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
            if (ec != std::errc() || ptr != digits.data() + digits.size() || k < 1)
                throw ParseError("'" + path + "': bad feature column name '" + name + "'", 0, name);
            role[c] = kFeature;
            feature_slot[c] = k - 1;
            d = std::max<Index>(d, k);
        } else if (!schema.ignore_unknown_columns) {
            throw ParseError("'" + path + "': unknown column '" + name + "'", 0, name);
        }
        if (role[c] != kIgnored && role[c] != kFeature && seen[role[c]]++ > 0)
            throw ParseError("'" + path + "': duplicate column '" + name + "'", 0, name);
    }
    std::vector<int> feature_seen(static_cast<std::size_t>(d), 0);
    for (std::size_t c = 0; c < header.size(); ++c)
        if (role[c] == kFeature) ++feature_seen[static_cast<std::size_t>(feature_slot[c])];
    for (Index k = 0; k < d; ++k) {
        const std::string name = schema.feature_prefix + std::to_string(k + 1);
        if (feature_seen[static_cast<std::size_t>(k)] != 1)
            throw ParseError("'" + path + "': feature column '" + name + "' missing or duplicated", 0, name);
    }
    if (d == 0) throw ParseError("'" + path + "': no feature columns", 0, schema.feature_prefix + "1");
    if (!seen[kTreatment]) throw ParseError("'" + path + "': missing column '" + schema.treatment + "'", 0, schema.treatment);
    if (!seen[kOutcome]) throw ParseError("'" + path + "': missing column '" + schema.outcome + "'", 0, schema.outcome);

    std::vector<double> x, y, ycf, ite;
    std::vector<int> w;
    long row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        ++row;
        const auto cells = detail::split_commas(t);
        if (cells.size() != header.size())
            throw ParseError("'" + path + "' row " + std::to_string(row) + ": expected " +
                                 std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()),
                             row);
        std::vector<double> xrow(static_cast<std::size_t>(d));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (role[c] == kIgnored) continue;
            const auto v = detail::parse_double(cells[c]);
            if (!v)
                throw ParseError("'" + path + "' row " + std::to_string(row) + ", column '" + header[c] +
                                     "': non-numeric cell '" + std::string(detail::trim(cells[c])) + "'",
                                 row, header[c]);
            switch (role[c]) {
                case kFeature: xrow[static_cast<std::size_t>(feature_slot[c])] = *v; break;
                case kTreatment:
                    if (*v != 0.0 && *v != 1.0)
                        throw ValidationError("'" + path + "' row " + std::to_string(row) +
                                                  ": treatment w must be 0 or 1, got " + std::string(detail::trim(cells[c])),
                                              row);
                    w.push_back(static_cast<int>(*v));
                    break;
                case kOutcome: y.push_back(*v); break;
                case kCounterfactual: ycf.push_back(*v); break;
                case kIte: ite.push_back(*v); break;
                default: break;
            }
        }
        x.insert(x.end(), xrow.begin(), xrow.end());
    }
    if (row == 0) throw ParseError("'" + path + "': no data rows");

    const Index n = row;
    Eigen::MatrixXd features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        x.data(), n, d);
    Eigen::VectorXi treatments = Eigen::Map<const Eigen::VectorXi>(w.data(), n);
    Eigen::VectorXd outcomes = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    std::optional<Eigen::VectorXd> cf, te;
    if (seen[kCounterfactual]) cf = Eigen::Map<const Eigen::VectorXd>(ycf.data(), n);
    if (seen[kIte]) te = Eigen::Map<const Eigen::VectorXd>(ite.data(), n);
    return {std::move(features), std::move(treatments), std::move(outcomes), std::move(cf), std::move(te)};
}

/// Writes the dataset in the layout read by `load_csv`. `comment`, when
/// non-empty, is emitted as a leading '#' line.
inline void write_csv(const ObservationalDataset& ds, std::ostream& out, const std::string& comment = {}) {
    if (!comment.empty()) out << "# " << comment << '\n';
    for (Index k = 0; k < ds.d(); ++k) out << 'x' << (k + 1) << ',';
    out << "w,y";
    if (ds.counterfactuals()) out << ",y_cf";
    if (ds.true_ite()) out << ",ite";
    out << '\n';
    for (Index i = 0; i < ds.n(); ++i) {
        for (Index k = 0; k < ds.d(); ++k) out << detail::format_double(ds.features()(i, k)) << ',';
        out << ds.treatments()(i) << ',' << detail::format_double(ds.outcomes()(i));
        if (ds.counterfactuals()) out << ',' << detail::format_double((*ds.counterfactuals())(i));
        if (ds.true_ite()) out << ',' << detail::format_double((*ds.true_ite())(i));
        out << '\n';
    }
}

inline void write_csv(const ObservationalDataset& ds, const std::string& path, const std::string& comment = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write CSV file '" + path + "'");
    write_csv(ds, out, comment);
    if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Feature scaling

/// Per-column affine map fitted on training features (zero mean, unit
/// variance). Constant columns keep scale 1.
struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;

    static Standardizer identity(Index d) {
        return {Eigen::RowVectorXd::Zero(d), Eigen::RowVectorXd::Ones(d)};
    }

    static Standardizer fit(const Eigen::MatrixXd& x) {
        Standardizer s;
        s.mean = x.colwise().mean();
        s.scale.resize(x.cols());
        for (Index k = 0; k < x.cols(); ++k) {
            const double var = (x.col(k).array() - s.mean(k)).square().mean();
            s.scale(k) = var > 1e-24 ? std::sqrt(var) : 1.0;
        }
        return s;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        if (x.cols() != mean.size())
            throw ShapeError("standardizer expects " + std::to_string(mean.size()) + " feature columns, got " +
                             std::to_string(x.cols()));
        return (x.rowwise() - mean).array().rowwise() / scale.array();
    }
};

// ---------------------------------------------------------------------------
// Splits and folds

/// Train/validation/test partition plus a J-fold assignment of the training
/// subjects. All indices are zero-based positions in the source dataset.
struct SplitPlan {
    IndexList train_idx;
    IndexList valid_idx;
    IndexList test_idx;
    std::vector<int> folds;  // aligned with train_idx, labels 0..num_folds-1
    int num_folds = 0;
    std::uint64_t seed = 0;

    /// Dataset indices of training subjects in fold `j`.
    IndexList fold_members(int j) const {
        IndexList out;
        for (std::size_t k = 0; k < train_idx.size(); ++k)
            if (folds[k] == j) out.push_back(train_idx[k]);
        return out;
    }

    /// Dataset indices of training subjects outside fold `j`.
    IndexList fold_complement(int j) const {
        IndexList out;
        for (std::size_t k = 0; k < train_idx.size(); ++k)
            if (folds[k] != j) out.push_back(train_idx[k]);
        return out;
    }

    friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

struct SplitFractions {
    double train = 0.6;
    double valid = 0.2;
    double test = 0.2;
};

/// Deterministic split stratified by treatment arm.
///
/// Each arm is shuffled, then the arms are interleaved by relative rank so
/// that every prefix of the merged order holds both arms in proportion; the
/// train/valid/test sets are consecutive chunks of that order. Folds are dealt
/// round-robin over the training controls and then, continuing the same
/// cycle, over the training treated subjects, so fold sizes differ by at most
/// one and each fold holds floor or ceil of |treated|/J treated subjects.
namespace detail {

// Arm-stratified random order: each arm is shuffled, then arms are merged by
// relative rank so every prefix has (nearly) the population treated share.
inline IndexList stratified_order(const DatasetView& ds, std::mt19937_64& rng) {
    struct Slot {
        double key;
        int arm;
        Index idx;
    };
    std::vector<Slot> order;
    order.reserve(static_cast<std::size_t>(ds.n()));
    for (int arm = 0; arm < 2; ++arm) {
        IndexList members = ds.arm_indices(arm);
        std::shuffle(members.begin(), members.end(), rng);
        const double size = static_cast<double>(members.size());
        for (std::size_t r = 0; r < members.size(); ++r)
            order.push_back({(static_cast<double>(r) + 0.5) / size, arm, members[r]});
    }
    std::sort(order.begin(), order.end(), [](const Slot& a, const Slot& b) {
        return a.key != b.key ? a.key < b.key : a.arm < b.arm;
    });
    IndexList out;
    out.reserve(order.size());
    for (const auto& s : order) out.push_back(s.idx);
    return out;
}

// Folds dealt round-robin, controls first, treated continuing the cycle.
inline void deal_folds(const DatasetView& ds, SplitPlan& plan) {
    plan.folds.assign(plan.train_idx.size(), 0);
    int next = 0;
    for (int arm = 0; arm < 2; ++arm) {
        for (std::size_t k = 0; k < plan.train_idx.size(); ++k) {
            if (ds.treatments(plan.train_idx[k]) != arm) continue;
            plan.folds[k] = next;
            next = (next + 1) % plan.num_folds;
        }
    }
}

}  // namespace detail

inline SplitPlan make_split(const DatasetView& ds, SplitFractions fr, int num_folds, std::uint64_t seed) {
    if (!(fr.train > 0 && fr.valid > 0 && fr.test > 0))
        throw ConfigError("split fractions must be positive");
    if (std::abs(fr.train + fr.valid + fr.test - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");
    if (num_folds < 2) throw ConfigError("fold count J must be at least 2");

    const Index n = ds.n();
    Index n_train = std::llround(fr.train * static_cast<double>(n));
    Index n_valid = std::llround(fr.valid * static_cast<double>(n));
    n_train = std::min(n_train, n);
    n_valid = std::min(n_valid, n - n_train);
    if (n_train < num_folds)
        throw ConfigError("fold count J=" + std::to_string(num_folds) + " exceeds training set size " +
                          std::to_string(n_train));

    std::mt19937_64 rng(seed);
    const IndexList order = detail::stratified_order(ds, rng);
    SplitPlan plan;
    plan.seed = seed;
    plan.num_folds = num_folds;
    for (Index k = 0; k < n; ++k) {
        const Index idx = order[static_cast<std::size_t>(k)];
        if (k < n_train)
            plan.train_idx.push_back(idx);
        else if (k < n_train + n_valid)
            plan.valid_idx.push_back(idx);
        else
            plan.test_idx.push_back(idx);
    }
    detail::deal_folds(ds, plan);
    return plan;
}

/// All rows used for training, partitioned into J stratified folds.
inline SplitPlan make_folds(const DatasetView& ds, int num_folds, std::uint64_t seed) {
    if (num_folds < 2) throw ConfigError("fold count J must be at least 2");
    if (ds.n() < num_folds)
        throw ConfigError("fold count J=" + std::to_string(num_folds) + " exceeds training set size " +
                          std::to_string(ds.n()));
    std::mt19937_64 rng(seed);
    SplitPlan plan;
    plan.seed = seed;
    plan.num_folds = num_folds;
    plan.train_idx = detail::stratified_order(ds, rng);
    detail::deal_folds(ds, plan);
    return plan;
}

inline void to_json(nlohmann::json& j, const SplitPlan& p) {
    j = nlohmann::json{{"train", p.train_idx}, {"valid", p.valid_idx}, {"test", p.test_idx},
                       {"folds", p.folds},     {"num_folds", p.num_folds}, {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, SplitPlan& p) {
    p.train_idx = j.at("train").get<IndexList>();
    p.valid_idx = j.at("valid").get<IndexList>();
    p.test_idx = j.at("test").get<IndexList>();
    p.folds = j.at("folds").get<std::vector<int>>();
    p.num_folds = j.at("num_folds").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
    if (p.folds.size() != p.train_idx.size()) throw ConfigError("split plan: folds must align with train indices");
}

}  // namespace mtgp

#endif  // MTGP_DATASET_HPP
