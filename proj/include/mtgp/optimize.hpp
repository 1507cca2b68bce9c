#ifndef MTGP_OPTIMIZE_HPP
#define MTGP_OPTIMIZE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "mtgp/errors.hpp"

namespace mtgp {

struct SimplexResult {
    Eigen::VectorXd argmin;
    double value = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    bool converged = false;
};

/// Value returned to the simplex in place of a failed or non-finite
/// objective evaluation.
inline constexpr double kFailedObjective = 1e100;

/// Derivative-free Nelder-Mead minimization (GSL nmsimplex2) capped at
/// `max_evaluations` objective calls. Stops early once the simplex size
/// falls below `size_tol`.
inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                                 const Eigen::VectorXd& start, double step, int max_evaluations,
                                 double size_tol = 1e-3) {
    static std::once_flag gsl_handler_once;
    std::call_once(gsl_handler_once, [] { gsl_set_error_handler_off(); });

    if (start.size() < 1) throw ConfigError("nelder_mead: empty parameter vector");
    if (max_evaluations < 1) throw ConfigError("nelder_mead: evaluation budget must be at least 1");

    struct State {
        const std::function<double(const Eigen::VectorXd&)>* f;
        SimplexResult best;
        Eigen::VectorXd scratch;
    } state{&objective, {}, Eigen::VectorXd(start.size())};

    auto trampoline = [](const gsl_vector* v, void* params) -> double {
        auto* st = static_cast<State*>(params);
        for (Eigen::Index k = 0; k < st->scratch.size(); ++k) st->scratch(k) = gsl_vector_get(v, static_cast<size_t>(k));
        double value = kFailedObjective;
        try {
            value = (*st->f)(st->scratch);
        } catch (const Error&) {
            value = kFailedObjective;
        }
        if (!std::isfinite(value)) value = kFailedObjective;
        ++st->best.evaluations;
        if (value < st->best.value) {
            st->best.value = value;
            st->best.argmin = st->scratch;
        }
        return value;
    };

    const auto n = static_cast<size_t>(start.size());
    if (n == 0 || max_evaluations <= static_cast<int>(n) + 1) {
        // Not enough budget to build a simplex: evaluate the start only.
        gsl_vector_view v = gsl_vector_view_array(const_cast<double*>(start.data()), n);
        trampoline(&v.vector, &state);
        return state.best;
    }

    gsl_multimin_function fn{trampoline, n, &state};
    gsl_vector* x = gsl_vector_alloc(n);
    gsl_vector* steps = gsl_vector_alloc(n);
    for (size_t k = 0; k < n; ++k) {
        gsl_vector_set(x, k, start(static_cast<Eigen::Index>(k)));
        gsl_vector_set(steps, k, step);
    }
    gsl_multimin_fminimizer* solver = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(solver, &fn, x, steps);

    while (state.best.evaluations < max_evaluations) {
        if (gsl_multimin_fminimizer_iterate(solver) != GSL_SUCCESS) break;
        const double size = gsl_multimin_fminimizer_size(solver);
        if (gsl_multimin_test_size(size, size_tol) == GSL_SUCCESS) {
            state.best.converged = true;
            break;
        }
    }
    gsl_multimin_fminimizer_free(solver);
    gsl_vector_free(steps);
    gsl_vector_free(x);
    return state.best;
}

}  // namespace mtgp

#endif  // MTGP_OPTIMIZE_HPP
