#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace guide {

/// Worker cap: GUIDE_THREADS env var if set, hardware concurrency otherwise.
inline int max_worker_threads() {
    if (const char* env = std::getenv("GUIDE_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace detail {
inline thread_local bool in_parallel_region = false;
}

/// Static block-partitioned parallel loop. fn(i) must write only to slot i of
/// preallocated outputs; nested invocations run inline, so results never
/// depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    if (n == 0) return;
    const std::size_t nt =
        std::min<std::size_t>(n, static_cast<std::size_t>(max_worker_threads()));
    if (nt <= 1 || detail::in_parallel_region) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        const std::size_t lo = n * t / nt;
        const std::size_t hi = n * (t + 1) / nt;
        workers.emplace_back([&, lo, hi] {
            detail::in_parallel_region = true;
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
            detail::in_parallel_region = false;
        });
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

/// Numerically stable mean: pairwise summation. For arrays of identical
/// values and power-of-two length the result is exact, which keeps
/// deterministic Monte Carlo estimates (zero-variance cases) exact.
inline double pairwise_sum(const double* data, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

}  // namespace guide
