#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fgap::detail {

inline unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// Runs fn(i) for every i in [0, n). Work items must write only to their own
// slots, so results do not depend on the number of threads.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// Sum of fn over [0, n) in fixed-size chunks reduced in chunk order.
inline double chunked_sum(std::size_t n, const std::function<double(std::size_t, std::size_t)>& fn,
                          std::size_t chunk = 1 << 14) {
    std::size_t chunks = (n + chunk - 1) / chunk;
    std::vector<double> part(chunks, 0.0);
    parallel_for(chunks, [&](std::size_t c) { part[c] = fn(c * chunk, std::min(n, (c + 1) * chunk)); });
    double s = 0.0;
    for (double x : part) s += x;
    return s;
}

}  // namespace fgap::detail
