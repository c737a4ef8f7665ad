#ifndef KEDFL_PARALLEL_HPP
#define KEDFL_PARALLEL_HPP

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace kedfl {

/// Thread count resolution: explicit request, else KEDFL_THREADS, else
/// hardware concurrency.
inline int resolve_thread_count(int requested)
{
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("KEDFL_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0)
            return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(0), ..., fn(n-1), possibly concurrently. Callers must write
/// results into per-index slots; outputs are then independent of scheduling
/// and thread count.
inline void run_indexed(std::size_t n, int threads, const std::function<void(std::size_t)>& fn)
{
    if (n == 0)
        return;
    const std::size_t workers = std::min<std::size_t>(threads < 1 ? 1 : threads, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error)
                    first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back(worker);
    for (std::thread& t : pool)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

}  // namespace kedfl

#endif
