#ifndef MTGP_SYNTHGEN_HPP
#define MTGP_SYNTHGEN_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <fftw3.h>
#include <json.hpp>

#include "mtgp/dataset.hpp"
#include "mtgp/errors.hpp"
#include "mtgp/json_util.hpp"
#include "mtgp/kernels.hpp"
#include "mtgp/random.hpp"

namespace mtgp {

// ---------------------------------------------------------------------------
// Surface specifications

/// Sample path of a zero-mean Matérn(nu) GP on [0,1]^|dims|, drawn on a
/// regular lattice and interpolated multilinearly. resolution = 0 picks a
/// lattice size from the number of active dimensions.
struct GpDrawSpec {
    double nu = 0.5;
    double length_scale = 0.25;
    double variance = 1.0;
    int resolution = 0;
};

/// Additive polynomial: sum over relevant dims k of sum_p coeffs[p] x_k^p.
struct PolynomialSpec {
    std::vector<double> coeffs;
};

/// intercept + sum_k weights[k] x_{dims[k]}.
struct LinearSpec {
    std::vector<double> weights;
    double intercept = 0.0;
};

/// intercept + exp(sum_k weights[k] (x_{dims[k]} + offsets[k])).
struct ExponentialSpec {
    std::vector<double> weights;
    std::vector<double> offsets;  // empty -> 0.5 for every dim
    double intercept = 0.0;
};

using SurfaceSpec = std::variant<GpDrawSpec, PolynomialSpec, LinearSpec, ExponentialSpec>;

inline constexpr double kMaxLatticePoints = 1e6;

inline int auto_resolution(std::size_t active_dims) {
    if (active_dims <= 1) return 4096;
    if (active_dims == 2) return 512;
    const int cap = static_cast<int>(std::floor(std::pow(kMaxLatticePoints, 1.0 / static_cast<double>(active_dims)) + 1e-9));
    return std::max(2, std::min(64, cap));
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Values of a stationary Matérn GP on the lattice {0, h, ..., 1}^k with
/// h = 1/(res-1), by circulant embedding. The embedding torus is padded until
/// its spectrum is numerically nonnegative (remaining negative eigenvalues
/// are clipped).
inline std::vector<double> circulant_lattice_draw(double nu, double length_scale, double variance, int res, int k,
                                                  std::mt19937_64& rng) {
    const double h = 1.0 / static_cast<double>(res - 1);
    std::vector<double> lambda;
    std::vector<int> dims;
    std::size_t total = 0;
    for (int pad = 1;; pad *= 2) {
        const int m = 2 * (res - 1) * pad;
        dims.assign(static_cast<std::size_t>(k), m);
        total = 1;
        for (int i = 0; i < k; ++i) total *= static_cast<std::size_t>(m);

        fftw_complex* buf = fftw_alloc_complex(total);
        for (std::size_t lin = 0; lin < total; ++lin) {
            std::size_t rem = lin;
            double r2 = 0.0;
            for (int i = k - 1; i >= 0; --i) {
                const auto j = static_cast<int>(rem % static_cast<std::size_t>(m));
                rem /= static_cast<std::size_t>(m);
                const double lag = std::min(j, m - j) * h / length_scale;
                r2 += lag * lag;
            }
            buf[lin][0] = variance * correlation(KernelFamily::Matern, nu, std::sqrt(r2));
            buf[lin][1] = 0.0;
        }
        fftw_plan plan;
        {
            std::lock_guard<std::mutex> lock(fftw_planner_mutex());
            plan = fftw_plan_dft(k, dims.data(), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        }
        fftw_execute(plan);
        lambda.resize(total);
        double max_l = 0.0, min_l = 0.0;
        for (std::size_t i = 0; i < total; ++i) {
            lambda[i] = buf[i][0];
            max_l = std::max(max_l, lambda[i]);
            min_l = std::min(min_l, lambda[i]);
        }
        {
            std::lock_guard<std::mutex> lock(fftw_planner_mutex());
            fftw_destroy_plan(plan);
        }
        fftw_free(buf);
        if (min_l >= -1e-8 * max_l || pad >= 8 || total * 8 > (std::size_t{1} << 26)) break;
    }

    std::normal_distribution<double> normal;
    fftw_complex* z = fftw_alloc_complex(total);
    for (std::size_t i = 0; i < total; ++i) {
        const double s = std::sqrt(std::max(lambda[i], 0.0) / static_cast<double>(total));
        z[i][0] = s * normal(rng);
        z[i][1] = s * normal(rng);
    }
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan = fftw_plan_dft(k, dims.data(), z, z, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);

    std::size_t count = 1;
    for (int i = 0; i < k; ++i) count *= static_cast<std::size_t>(res);
    std::vector<double> out(count);
    const int m = dims[0];
    for (std::size_t lin = 0; lin < count; ++lin) {
        std::size_t rem = lin, src = 0, stride = 1;
        for (int i = k - 1; i >= 0; --i) {
            src += (rem % static_cast<std::size_t>(res)) * stride;
            rem /= static_cast<std::size_t>(res);
            stride *= static_cast<std::size_t>(m);
        }
        out[lin] = z[src][0];
    }
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(z);
    return out;
}

}  // namespace detail

/// A response surface that can be evaluated anywhere; depends only on the
/// coordinates listed in `dims()`.
class Surface {
public:
    struct Lattice {
        int resolution = 2;
        std::vector<double> values;  // row-major over the active dims
    };

    Surface(IndexList dims, std::variant<Lattice, PolynomialSpec, LinearSpec, ExponentialSpec> impl)
        : dims_(std::move(dims)), impl_(std::move(impl)) {}

    const IndexList& dims() const { return dims_; }

    double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        for (auto k : dims_)
            if (k >= x.size()) throw ShapeError("surface: input has fewer columns than its relevant dims");
        return std::visit([&](const auto& s) { return eval(s, x); }, impl_);
    }

    Eigen::VectorXd evaluate(const Eigen::MatrixXd& x) const {
        Eigen::VectorXd out(x.rows());
        for (Index i = 0; i < x.rows(); ++i) out(i) = (*this)(x.row(i));
        return out;
    }

    const Lattice* lattice() const { return std::get_if<Lattice>(&impl_); }

private:
    double eval(const Lattice& lat, const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        const auto k = dims_.size();
        if (lat.values.empty()) return 0.0;
        const int res = lat.resolution;
        std::vector<std::size_t> base(k);
        std::vector<double> frac(k);
        for (std::size_t i = 0; i < k; ++i) {
            const double pos = std::clamp(x(dims_[i]), 0.0, 1.0) * (res - 1);
            const auto b = static_cast<std::size_t>(std::min<double>(std::floor(pos), res - 2));
            base[i] = b;
            frac[i] = pos - static_cast<double>(b);
        }
        double acc = 0.0;
        for (std::size_t corner = 0; corner < (std::size_t{1} << k); ++corner) {
            double weight = 1.0;
            std::size_t lin = 0;
            for (std::size_t i = 0; i < k; ++i) {
                const bool up = (corner >> (k - 1 - i)) & 1U;
                weight *= up ? frac[i] : 1.0 - frac[i];
                lin = lin * static_cast<std::size_t>(res) + base[i] + (up ? 1 : 0);
            }
            if (weight != 0.0) acc += weight * lat.values[lin];
        }
        return acc;
    }

    double eval(const PolynomialSpec& p, const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        double acc = 0.0;
        for (auto k : dims_) {
            double power = 1.0;
            for (double c : p.coeffs) {
                acc += c * power;
                power *= x(k);
            }
        }
        return acc;
    }

    double eval(const LinearSpec& l, const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        double acc = l.intercept;
        for (std::size_t i = 0; i < dims_.size(); ++i) acc += l.weights[i] * x(dims_[i]);
        return acc;
    }

    double eval(const ExponentialSpec& e, const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < dims_.size(); ++i) acc += e.weights[i] * (x(dims_[i]) + (e.offsets.empty() ? 0.5 : e.offsets[i]));
        return e.intercept + std::exp(acc);
    }

    IndexList dims_;
    std::variant<Lattice, PolynomialSpec, LinearSpec, ExponentialSpec> impl_;
};

/// Draws a Matérn(nu) sample path over the coordinates `dims` of the unit
/// cube. Deterministic given `seed`.
inline Surface gp_draw_surface(double nu, double length_scale, double variance, const IndexList& dims, int resolution,
                               std::uint64_t seed) {
    if (dims.empty()) throw ConfigError("gp_draw_surface: dims must be nonempty");
    if (!ScalarKernelSpec::is_allowed_nu(nu)) throw ConfigError("gp_draw_surface: nu must be 0.5, 1.5 or 2.5");
    if (!(length_scale > 0.0)) throw ConfigError("gp_draw_surface: length_scale must be positive");
    if (!(variance >= 0.0)) throw ConfigError("gp_draw_surface: variance must be nonnegative");
    const int res = resolution > 0 ? resolution : auto_resolution(dims.size());
    if (res < 2) throw ConfigError("gp_draw_surface: resolution must be at least 2");
    if (std::pow(static_cast<double>(res), static_cast<double>(dims.size())) > kMaxLatticePoints)
        throw ConfigError("gp_draw_surface: lattice of " + std::to_string(res) + "^" + std::to_string(dims.size()) +
                          " points exceeds the 1e6 cap");
    Surface::Lattice lat;
    lat.resolution = res;
    if (variance > 0.0) {
        std::mt19937_64 rng(seed);
        lat.values = detail::circulant_lattice_draw(nu, length_scale, variance, res, static_cast<int>(dims.size()), rng);
    }
    return Surface(dims, std::move(lat));
}

// ---------------------------------------------------------------------------
// Generator

struct PropensitySpec {
    enum class Kind { Constant, Logistic };
    Kind kind = Kind::Logistic;
    double gamma = 0.5;           // Constant
    std::vector<double> weights;  // Logistic, length d (missing entries are 0)
    double intercept = 0.0;
    double steepness = 0.0;
};

/// Semi-synthetic causal data model: X ~ U[0,1]^d (or Bernoulli on
/// `binary_columns`), w ~ Bernoulli(clamped propensity(X)),
/// Y^(a) = f_a(X) + N(0, noise_a).
struct GeneratorConfig {
    Index n = 500;
    Index d = 1;
    SurfaceSpec surface0 = GpDrawSpec{};
    SurfaceSpec surface1 = GpDrawSpec{};
    IndexList relevant_dims0;  // zero-based; empty -> all
    IndexList relevant_dims1;
    double noise0 = 0.1;
    double noise1 = 0.1;
    PropensitySpec propensity;
    double gamma_min = 0.05;
    double gamma_max = 0.95;
    IndexList binary_columns;
    double binary_probability = 0.5;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> surface_seed;
    std::optional<std::uint64_t> assignment_seed;

    void validate() const {
        if (n < 1 || d < 1) throw ConfigError("generator: n and d must be >= 1");
        if (!(0.0 < gamma_min && gamma_min <= gamma_max && gamma_max < 1.0))
            throw ConfigError("generator: overlap clamp needs 0 < gamma_min <= gamma_max < 1");
        if (!(noise0 >= 0.0) || !(noise1 >= 0.0)) throw ConfigError("generator: noise variances must be >= 0");
        for (const auto* dims : {&relevant_dims0, &relevant_dims1, &binary_columns})
            for (auto k : *dims)
                if (k < 0 || k >= d) throw ConfigError("generator: dimension index " + std::to_string(k) + " outside 0..d-1");
        if (!(binary_probability >= 0.0 && binary_probability <= 1.0))
            throw ConfigError("generator: binary_probability must lie in [0,1]");
        if (propensity.kind == PropensitySpec::Kind::Constant && !(propensity.gamma >= 0.0 && propensity.gamma <= 1.0))
            throw ConfigError("generator: constant propensity must lie in [0,1]");
        if (propensity.weights.size() > static_cast<std::size_t>(d))
            throw ConfigError("generator: propensity weights longer than d");
        for (int arm = 0; arm < 2; ++arm) {
            const auto& spec = arm == 0 ? surface0 : surface1;
            const auto count = resolved_dims(arm).size();
            if (const auto* l = std::get_if<LinearSpec>(&spec); l && l->weights.size() != count)
                throw ConfigError("generator: linear surface " + std::to_string(arm) + " needs one weight per relevant dim");
            if (const auto* e = std::get_if<ExponentialSpec>(&spec);
                e && (e->weights.size() != count || (!e->offsets.empty() && e->offsets.size() != count)))
                throw ConfigError("generator: exponential surface " + std::to_string(arm) +
                                  " needs one weight (and offset) per relevant dim");
        }
    }

    IndexList resolved_dims(int arm) const {
        const IndexList& dims = arm == 0 ? relevant_dims0 : relevant_dims1;
        if (!dims.empty()) return dims;
        IndexList all(static_cast<std::size_t>(d));
        for (Index k = 0; k < d; ++k) all[static_cast<std::size_t>(k)] = k;
        return all;
    }
};

enum : std::uint64_t { kStreamSurface = 1, kStreamFeatures = 2, kStreamNoise = 3, kStreamAssignment = 4 };

/// Generator with its response surfaces realized once, so that many datasets
/// (or query sets) can be sampled from the same f0, f1 and propensity.
class SyntheticModel {
public:
    explicit SyntheticModel(GeneratorConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const std::uint64_t sseed = cfg_.surface_seed.value_or(derive_seed(cfg_.seed, {kStreamSurface}));
        f0_ = realize(cfg_.surface0, cfg_.resolved_dims(0), derive_seed(sseed, {0}));
        f1_ = realize(cfg_.surface1, cfg_.resolved_dims(1), derive_seed(sseed, {1}));
    }

    const GeneratorConfig& config() const { return cfg_; }
    const Surface& surface(int arm) const { return arm == 0 ? *f0_ : *f1_; }

    Eigen::MatrixXd sample_features(Index n, std::uint64_t seed) const {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::vector<char> binary(static_cast<std::size_t>(cfg_.d), 0);
        for (auto k : cfg_.binary_columns) binary[static_cast<std::size_t>(k)] = 1;
        Eigen::MatrixXd x(n, cfg_.d);
        for (Index i = 0; i < n; ++i)
            for (Index k = 0; k < cfg_.d; ++k) {
                const double u = unif(rng);
                x(i, k) = binary[static_cast<std::size_t>(k)] ? (u < cfg_.binary_probability ? 1.0 : 0.0) : u;
            }
        return x;
    }

    /// Clamped propensity at each row of x.
    Eigen::VectorXd propensity(const Eigen::MatrixXd& x) const {
        Eigen::VectorXd g(x.rows());
        const auto& p = cfg_.propensity;
        for (Index i = 0; i < x.rows(); ++i) {
            double gamma = p.gamma;
            if (p.kind == PropensitySpec::Kind::Logistic) {
                double score = 0.0;
                for (std::size_t k = 0; k < p.weights.size(); ++k)
                    score += p.weights[k] * (x(i, static_cast<Index>(k)) - 0.5);
                gamma = 1.0 / (1.0 + std::exp(-(p.intercept + p.steepness * score)));
            }
            g(i) = std::clamp(gamma, cfg_.gamma_min, cfg_.gamma_max);
        }
        return g;
    }

    Eigen::VectorXd true_ite(const Eigen::MatrixXd& x) const { return f1_->evaluate(x) - f0_->evaluate(x); }

    /// Draws a dataset of size n. The feature, noise and assignment streams
    /// are independent, so changing `assignment_seed` alters only which
    /// potential outcome is factual.
    ObservationalDataset sample(Index n, std::uint64_t seed, std::optional<std::uint64_t> assignment_seed = std::nullopt) const {
        if (n < 1) throw ConfigError("generator: n must be >= 1");
        Eigen::MatrixXd x = sample_features(n, derive_seed(seed, {kStreamFeatures}));
        const Eigen::VectorXd mu0 = f0_->evaluate(x), mu1 = f1_->evaluate(x);

        std::mt19937_64 noise_rng(derive_seed(seed, {kStreamNoise}));
        std::normal_distribution<double> normal;
        Eigen::VectorXd y0(n), y1(n);
        for (Index i = 0; i < n; ++i) {
            y0(i) = mu0(i) + std::sqrt(cfg_.noise0) * normal(noise_rng);
            y1(i) = mu1(i) + std::sqrt(cfg_.noise1) * normal(noise_rng);
        }

        const Eigen::VectorXd gamma = propensity(x);
        std::mt19937_64 assign_rng(assignment_seed.value_or(derive_seed(seed, {kStreamAssignment})));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Eigen::VectorXi w(n);
        Eigen::VectorXd y(n), ycf(n);
        for (Index i = 0; i < n; ++i) {
            w(i) = unif(assign_rng) < gamma(i) ? 1 : 0;
            y(i) = w(i) ? y1(i) : y0(i);
            ycf(i) = w(i) ? y0(i) : y1(i);
        }
        Eigen::VectorXd ite = mu1 - mu0;
        return {std::move(x), std::move(w), std::move(y), std::move(ycf), std::move(ite)};
    }

private:
    static std::shared_ptr<const Surface> realize(const SurfaceSpec& spec, const IndexList& dims, std::uint64_t seed) {
        if (const auto* g = std::get_if<GpDrawSpec>(&spec))
            return std::make_shared<Surface>(gp_draw_surface(g->nu, g->length_scale, g->variance, dims, g->resolution, seed));
        if (const auto* p = std::get_if<PolynomialSpec>(&spec)) return std::make_shared<Surface>(dims, *p);
        if (const auto* l = std::get_if<LinearSpec>(&spec)) return std::make_shared<Surface>(dims, *l);
        return std::make_shared<Surface>(dims, std::get<ExponentialSpec>(spec));
    }

    GeneratorConfig cfg_;
    std::shared_ptr<const Surface> f0_, f1_;
};

inline ObservationalDataset generate(const GeneratorConfig& cfg) {
    return SyntheticModel(cfg).sample(cfg.n, cfg.seed, cfg.assignment_seed);
}

// ---------------------------------------------------------------------------
// IHDP-style analog

/// Settings for a 25-covariate analog of the IHDP semi-synthetic benchmark:
/// 6 uniform and 19 binary covariates, an exponential control surface, a
/// linear treated surface shifted so that the average effect on the treated
/// equals `treated_effect`, and logistic selection calibrated to the target
/// treated fraction. It does not use the original study's covariates or coefficients.
struct IhdpAnalogConfig {
    Index n = 747;
    double treated_fraction = 139.0 / 747.0;
    double steepness = 1.0;
    double noise = 1.0;
    double treated_effect = 4.0;
    double gamma_min = 0.02;
    double gamma_max = 0.98;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> surface_seed;
};

inline constexpr Index kIhdpContinuous = 6;
inline constexpr Index kIhdpDim = 25;
inline constexpr Index kIhdpReferencePoints = 100000;

/// Resolves an IHDP analog into an explicit generator configuration. The
/// coefficients, the effect offset and the propensity intercept depend only
/// on the surface seed.
inline GeneratorConfig ihdp_analog_config(const IhdpAnalogConfig& c) {
    if (c.n < 1) throw ConfigError("ihdp_analog: n must be >= 1");
    if (!(c.treated_fraction > 0.0 && c.treated_fraction < 1.0))
        throw ConfigError("ihdp_analog: treated_fraction must lie in (0,1)");
    const std::uint64_t sseed = c.surface_seed.value_or(derive_seed(c.seed, {kStreamSurface}));
    std::mt19937_64 rng(derive_seed(sseed, {7}));

    // Coefficients in {0, .1, .2, .3, .4} with probabilities (.6, .1, .1, .1, .1).
    std::discrete_distribution<int> pick({0.6, 0.1, 0.1, 0.1, 0.1});
    std::vector<double> beta(static_cast<std::size_t>(kIhdpDim));
    for (auto& b : beta) b = 0.1 * pick(rng);

    GeneratorConfig g;
    g.n = c.n;
    g.d = kIhdpDim;
    for (Index k = kIhdpContinuous; k < kIhdpDim; ++k) g.binary_columns.push_back(k);
    g.binary_probability = 0.5;
    g.noise0 = g.noise1 = c.noise;
    g.gamma_min = c.gamma_min;
    g.gamma_max = c.gamma_max;
    g.seed = c.seed;
    g.surface_seed = sseed;
    // Surfaces act on standardized continuous columns z = sqrt(12) (x - 0.5):
    // f0 = exp(sum beta_k (z_k + 0.5)), f1 = sum beta_k z_k + shift.
    const double root12 = std::sqrt(12.0);
    ExponentialSpec f0{beta, std::vector<double>(beta.size(), 0.5), 0.0};
    LinearSpec f1{beta, 0.0};
    for (Index k = 0; k < kIhdpContinuous; ++k) {
        const auto i = static_cast<std::size_t>(k);
        f0.weights[i] = root12 * beta[i];
        f0.offsets[i] = 0.5 / root12 - 0.5;
        f1.weights[i] = root12 * beta[i];
        f1.intercept -= 0.5 * root12 * beta[i];
    }
    g.surface0 = f0;
    g.surface1 = f1;

    // Selection on two continuous columns and one binary column.
    g.propensity.kind = PropensitySpec::Kind::Logistic;
    g.propensity.weights.assign(static_cast<std::size_t>(kIhdpDim), 0.0);
    g.propensity.weights[0] = 1.0;
    g.propensity.weights[1] = -1.0;
    g.propensity.weights[static_cast<std::size_t>(kIhdpContinuous)] = 1.0;
    g.propensity.steepness = c.steepness;

    // Calibrate the propensity intercept and the effect offset on a fixed
    // reference sample from the covariate distribution.
    const SyntheticModel reference_model(g);
    const Eigen::MatrixXd ref = reference_model.sample_features(kIhdpReferencePoints, derive_seed(sseed, {8}));
    double lo = -20.0, hi = 20.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        g.propensity.intercept = mid;
        const double mean = SyntheticModel(g).propensity(ref).mean();
        (mean < c.treated_fraction ? lo : hi) = mid;
    }
    g.propensity.intercept = 0.5 * (lo + hi);

    const SyntheticModel calibrated(g);
    const Eigen::VectorXd gamma = calibrated.propensity(ref);
    const Eigen::VectorXd ite = calibrated.true_ite(ref);
    const double att = (gamma.array() * ite.array()).sum() / gamma.sum();
    std::get<LinearSpec>(g.surface1).intercept += c.treated_effect - att;
    return g;
}

inline ObservationalDataset ihdp_analog(const IhdpAnalogConfig& c) { return generate(ihdp_analog_config(c)); }

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const SurfaceSpec& s) {
    if (const auto* g = std::get_if<GpDrawSpec>(&s)) {
        j = {{"type", "gp_draw"}, {"nu", g->nu}, {"length_scale", g->length_scale}, {"variance", g->variance},
             {"resolution", g->resolution}};
    } else if (const auto* p = std::get_if<PolynomialSpec>(&s)) {
        j = {{"type", "polynomial"}, {"coeffs", p->coeffs}};
    } else if (const auto* l = std::get_if<LinearSpec>(&s)) {
        j = {{"type", "linear"}, {"weights", l->weights}, {"intercept", l->intercept}};
    } else {
        const auto& e = std::get<ExponentialSpec>(s);
        j = {{"type", "exponential"}, {"weights", e.weights}, {"offsets", e.offsets}, {"intercept", e.intercept}};
    }
}

inline void from_json(const nlohmann::json& j, SurfaceSpec& s) {
    const std::string where = "surface";
    const auto type = json_util::get<std::string>(j, "type", where);
    if (type == "gp_draw") {
        json_util::check_keys(j, {"type", "nu", "length_scale", "variance", "resolution"}, where);
        GpDrawSpec g;
        g.nu = json_util::get_or<double>(j, "nu", g.nu, where);
        g.length_scale = json_util::get_or<double>(j, "length_scale", g.length_scale, where);
        g.variance = json_util::get_or<double>(j, "variance", g.variance, where);
        g.resolution = json_util::get_or<int>(j, "resolution", g.resolution, where);
        s = g;
    } else if (type == "polynomial") {
        json_util::check_keys(j, {"type", "coeffs"}, where);
        s = PolynomialSpec{json_util::get<std::vector<double>>(j, "coeffs", where)};
    } else if (type == "linear") {
        json_util::check_keys(j, {"type", "weights", "intercept"}, where);
        s = LinearSpec{json_util::get<std::vector<double>>(j, "weights", where),
                       json_util::get_or<double>(j, "intercept", 0.0, where)};
    } else if (type == "exponential") {
        json_util::check_keys(j, {"type", "weights", "offsets", "intercept"}, where);
        s = ExponentialSpec{json_util::get<std::vector<double>>(j, "weights", where),
                            json_util::get_or<std::vector<double>>(j, "offsets", {}, where),
                            json_util::get_or<double>(j, "intercept", 0.0, where)};
    } else {
        throw ConfigError(where + ".type: unknown surface type '" + type + "'");
    }
}

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    nlohmann::json prop;
    if (c.propensity.kind == PropensitySpec::Kind::Constant)
        prop = {{"type", "constant"}, {"gamma", c.propensity.gamma}};
    else
        prop = {{"type", "logistic"},
                {"weights", c.propensity.weights},
                {"intercept", c.propensity.intercept},
                {"steepness", c.propensity.steepness}};
    j = {{"n", c.n},
         {"d", c.d},
         {"surface0", c.surface0},
         {"surface1", c.surface1},
         {"relevant_dims0", c.relevant_dims0},
         {"relevant_dims1", c.relevant_dims1},
         {"noise0", c.noise0},
         {"noise1", c.noise1},
         {"propensity", prop},
         {"overlap_clamp", {c.gamma_min, c.gamma_max}},
         {"binary_columns", c.binary_columns},
         {"binary_probability", c.binary_probability},
         {"seed", c.seed}};
    if (c.surface_seed) j["surface_seed"] = *c.surface_seed;
    if (c.assignment_seed) j["assignment_seed"] = *c.assignment_seed;
}

inline void from_json(const nlohmann::json& j, GeneratorConfig& c) {
    const std::string where = "generator";
    json_util::check_keys(j,
                          {"n", "d", "surface0", "surface1", "relevant_dims0", "relevant_dims1", "noise0", "noise1",
                           "propensity", "overlap_clamp", "binary_columns", "binary_probability", "seed",
                           "surface_seed", "assignment_seed"},
                          where);
    GeneratorConfig d;
    c.n = json_util::get_or<Index>(j, "n", d.n, where);
    c.d = json_util::get_or<Index>(j, "d", d.d, where);
    c.surface0 = j.contains("surface0") ? j.at("surface0").get<SurfaceSpec>() : d.surface0;
    c.surface1 = j.contains("surface1") ? j.at("surface1").get<SurfaceSpec>() : d.surface1;
    c.relevant_dims0 = json_util::get_or<IndexList>(j, "relevant_dims0", {}, where);
    c.relevant_dims1 = json_util::get_or<IndexList>(j, "relevant_dims1", {}, where);
    c.noise0 = json_util::get_or<double>(j, "noise0", d.noise0, where);
    c.noise1 = json_util::get_or<double>(j, "noise1", d.noise1, where);
    if (j.contains("propensity")) {
        const auto& p = j.at("propensity");
        const std::string pw = where + ".propensity";
        const auto type = json_util::get<std::string>(p, "type", pw);
        if (type == "constant") {
            json_util::check_keys(p, {"type", "gamma"}, pw);
            c.propensity.kind = PropensitySpec::Kind::Constant;
            c.propensity.gamma = json_util::get<double>(p, "gamma", pw);
        } else if (type == "logistic") {
            json_util::check_keys(p, {"type", "weights", "intercept", "steepness"}, pw);
            c.propensity.kind = PropensitySpec::Kind::Logistic;
            c.propensity.weights = json_util::get_or<std::vector<double>>(p, "weights", {}, pw);
            c.propensity.intercept = json_util::get_or<double>(p, "intercept", 0.0, pw);
            c.propensity.steepness = json_util::get_or<double>(p, "steepness", 0.0, pw);
        } else {
            throw ConfigError(pw + ".type: expected 'constant' or 'logistic'");
        }
    }
    if (j.contains("overlap_clamp")) {
        const auto clamp = json_util::get<std::vector<double>>(j, "overlap_clamp", where);
        if (clamp.size() != 2) throw ConfigError(where + ".overlap_clamp: expected [gamma_min, gamma_max]");
        c.gamma_min = clamp[0];
        c.gamma_max = clamp[1];
    }
    c.binary_columns = json_util::get_or<IndexList>(j, "binary_columns", {}, where);
    c.binary_probability = json_util::get_or<double>(j, "binary_probability", d.binary_probability, where);
    c.seed = json_util::get_or<std::uint64_t>(j, "seed", 0, where);
    if (j.contains("surface_seed")) c.surface_seed = json_util::get<std::uint64_t>(j, "surface_seed", where);
    if (j.contains("assignment_seed")) c.assignment_seed = json_util::get<std::uint64_t>(j, "assignment_seed", where);
    c.validate();
}

inline void to_json(nlohmann::json& j, const IhdpAnalogConfig& c) {
    j = {{"n", c.n},
         {"treated_fraction", c.treated_fraction},
         {"steepness", c.steepness},
         {"noise", c.noise},
         {"treated_effect", c.treated_effect},
         {"overlap_clamp", {c.gamma_min, c.gamma_max}},
         {"seed", c.seed}};
    if (c.surface_seed) j["surface_seed"] = *c.surface_seed;
}

inline void from_json(const nlohmann::json& j, IhdpAnalogConfig& c) {
    const std::string where = "ihdp_analog";
    json_util::check_keys(j, {"n", "treated_fraction", "steepness", "noise", "treated_effect", "overlap_clamp", "seed",
                              "surface_seed"},
                          where);
    IhdpAnalogConfig d;
    c.n = json_util::get_or<Index>(j, "n", d.n, where);
    c.treated_fraction = json_util::get_or<double>(j, "treated_fraction", d.treated_fraction, where);
    c.steepness = json_util::get_or<double>(j, "steepness", d.steepness, where);
    c.noise = json_util::get_or<double>(j, "noise", d.noise, where);
    c.treated_effect = json_util::get_or<double>(j, "treated_effect", d.treated_effect, where);
    if (j.contains("overlap_clamp")) {
        const auto clamp = json_util::get<std::vector<double>>(j, "overlap_clamp", where);
        if (clamp.size() != 2) throw ConfigError(where + ".overlap_clamp: expected [gamma_min, gamma_max]");
        c.gamma_min = clamp[0];
        c.gamma_max = clamp[1];
    }
    c.seed = json_util::get_or<std::uint64_t>(j, "seed", 0, where);
    if (j.contains("surface_seed")) c.surface_seed = json_util::get<std::uint64_t>(j, "surface_seed", where);
}

}  // namespace mtgp

#endif  // MTGP_SYNTHGEN_HPP
