#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace crx {

inline unsigned effective_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Runs fn(i) for i in [0, n). Work items must be independent and write only
// to their own output slot, which keeps results identical regardless of
// scheduling. The first exception thrown by any item is rethrown here.
inline void parallel_for(size_t n, unsigned n_threads, const std::function<void(size_t)>& fn) {
    n_threads = effective_threads(n_threads);
    if (n == 0) return;
    if (n_threads <= 1 || n == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };

    const size_t workers = std::min<size_t>(n_threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace crx
