#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace oca::detail {

// Runs fn(i) for i in [0, n) on up to `threads` workers, each owning a
// contiguous chunk. If several indices throw, the lowest one is rethrown so the
// failure reported does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::size_t> error_index(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            const std::size_t lo = t * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            for (std::size_t i = lo; i < hi; ++i) {
                try {
                    fn(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                    error_index[t] = i;
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (std::size_t t = 0; t < threads; ++t) {
        if (errors[t]) std::rethrow_exception(errors[t]);
    }
}

}  // namespace oca::detail
