#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dmlme {

namespace detail {
inline bool& inside_parallel_worker() {
    thread_local bool flag = false;
    return flag;
}
} // namespace detail

/// Runs body(0), ..., body(n-1), possibly on several threads. Each index is
/// executed exactly once; the caller is responsible for writing results into
/// per-index slots so the outcome does not depend on scheduling. Nested calls
/// from inside a worker run inline, which keeps thread counts bounded when
/// parallel loops compose (repetitions over forests over trees).
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const unsigned hw = std::thread::hardware_concurrency();
    if (n <= 1 || hw <= 1 || detail::inside_parallel_worker()) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }

    const std::size_t workers = std::min<std::size_t>(hw, n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto run = [&]() {
        detail::inside_parallel_worker() = true;
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) break;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true);
                break;
            }
        }
        detail::inside_parallel_worker() = false;
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 0; t + 1 < workers; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();

    if (error) std::rethrow_exception(error);
}

} // namespace dmlme
