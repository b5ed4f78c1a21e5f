#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace vellum {

/// Worker count for channel-level parallelism: VELLUM_THREADS if set to a
/// positive integer, else the hardware concurrency.
inline int worker_threads()
{
    if (const char* env = std::getenv("VELLUM_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) {
            return n;
        }
    }
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

/// Runs fn(0..n-1) on up to worker_threads() threads. The first exception
/// (lowest index) is rethrown after all tasks finish.
template <typename Fn>
void parallel_for(int n, Fn&& fn)
{
    const int threads = std::min(n, worker_threads());
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace vellum
