#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace tzone {

// Worker count: BAND_SOLVE_THREADS if set and positive, otherwise hardware concurrency.
inline unsigned worker_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("BAND_SOLVE_THREADS")) {
        try {
            long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return hw;
}

// Calls fn(i) for i in [0, n) on up to worker_count() threads. Each index is processed
// exactly once; the first exception is rethrown after all workers stop.
template <class Fn>
void parallel_for(size_t n, Fn&& fn, unsigned max_workers = 0) {
    unsigned workers = max_workers ? max_workers : worker_count();
    workers = static_cast<unsigned>(std::min<size_t>(workers, n));
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    auto body = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(mu);
                if (!err) err = std::current_exception();
                next = n;
            }
        }
    };
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
    pool.clear();
    if (err) std::rethrow_exception(err);
}

}  // namespace tzone
