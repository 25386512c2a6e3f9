#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace rfim {

// Runs fn(item, worker) for item in [0, count) across `threads` workers that
// pull from a shared counter. Callers write results into per-item slots, so
// output is independent of scheduling; `worker` indexes thread-local scratch.
// The first exception thrown by any worker is rethrown on the caller.
inline void parallel_for(int count, int threads, const std::function<void(int, int)>& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i, 0);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w]() {
            try {
                while (true) {
                    const int i = next.fetch_add(1);
                    if (i >= count) return;
                    fn(i, w);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace rfim
