#ifndef MTGP_PARALLEL_HPP
#define MTGP_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "mtgp/errors.hpp"

namespace mtgp {

inline constexpr const char* kThreadsEnv = "MTGP_THREADS";

/// Worker count from the environment, if set.
inline int threads_from_env(int fallback) {
    const char* v = std::getenv(kThreadsEnv);
    if (v == nullptr || *v == '\0') return fallback;
    char* end = nullptr;
    const long k = std::strtol(v, &end, 10);
    if (*end != '\0' || k < 1 || k > 1024) throw ConfigError(std::string(kThreadsEnv) + ": expected a positive integer");
    return static_cast<int>(k);
}

/// Runs body(0..count-1) on a shared work queue. Each index writes its own
/// result slot, so output is independent of the worker count. The first
/// exception (lowest index) is rethrown after all workers finish.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
    const auto workers = static_cast<std::size_t>(std::clamp<long>(threads, 1, static_cast<long>(std::max<std::size_t>(count, 1))));
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace mtgp

#endif  // MTGP_PARALLEL_HPP
