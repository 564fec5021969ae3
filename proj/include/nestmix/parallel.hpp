#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace nestmix {

inline int default_thread_count() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// Calls f(i) for i in [0, n) over contiguous static chunks. Callers write
// results into per-index slots and reduce afterwards in index order, so the
// outcome does not depend on the thread count.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& f) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    const std::size_t used = std::min(workers, n);
    const std::size_t chunk = (n + used - 1) / used;
    std::vector<std::exception_ptr> errors(used);
    {
        std::vector<std::jthread> pool;
        pool.reserve(used);
        for (std::size_t w = 0; w < used; ++w) {
            pool.emplace_back([&, w] {
                try {
                    const std::size_t end = std::min(n, (w + 1) * chunk);
                    for (std::size_t i = w * chunk; i < end; ++i) f(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace nestmix
