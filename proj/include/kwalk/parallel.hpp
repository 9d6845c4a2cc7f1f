#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "kwalk/rng.hpp"

namespace kwalk {

/// Number of workers used when a caller passes 0.
inline unsigned default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs `trial(rng, index)` for index in [0, count) and returns the results in
/// index order. Trial `i` gets its own CounterRng keyed by mix(seed, i), so the
/// output is identical for any worker count.
template <typename Result, typename TrialFn>
std::vector<Result> run_trials(std::size_t count, std::uint64_t seed, unsigned workers, TrialFn trial) {
    std::vector<Result> results(count);
    if (workers == 0) workers = default_workers();
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));

    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            CounterRng rng(mix(seed, i));
            results[i] = trial(rng, i);
        }
    };

    if (workers <= 1) {
        run_range(0, count);
        return results;
    }

    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                run_range(begin, end);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return results;
}

/// Sample mean and standard error of the mean, reduced in index order.
struct MeanStderr {
    double mean = 0.0;
    double std_error = 0.0;
};

inline MeanStderr mean_and_stderr(const std::vector<double>& values) {
    MeanStderr out;
    if (values.empty()) return out;
    const auto count = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / count;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.std_error = std::sqrt(ss / (count - 1.0) / count);
    }
    return out;
}

}  // namespace kwalk
