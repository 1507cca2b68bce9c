#ifndef MTGP_MTGP_HPP
#define MTGP_MTGP_HPP

#include "mtgp/benchmark.hpp"
#include "mtgp/dataset.hpp"
#include "mtgp/empirical_bayes.hpp"
#include "mtgp/errors.hpp"
#include "mtgp/estimators.hpp"
#include "mtgp/gp.hpp"
#include "mtgp/kernels.hpp"
#include "mtgp/metrics.hpp"
#include "mtgp/optimize.hpp"
#include "mtgp/parallel.hpp"
#include "mtgp/random.hpp"
#include "mtgp/rate_study.hpp"
#include "mtgp/synthgen.hpp"

#endif  // MTGP_MTGP_HPP
