#pragma once

#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace srnet {

/// Worker cap: SRNET_THREADS env var if set, hardware concurrency otherwise.
inline int max_threads() {
    static const int cached = [] {
        if (const char* env = std::getenv("SRNET_THREADS")) {
            const int v = std::atoi(env);
            if (v > 0) return v;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }();
    return cached;
}

namespace detail {
inline bool& inside_parallel_region() {
    thread_local bool flag = false;
    return flag;
}
} // namespace detail

/// Splits [0, n) into at most max_threads() contiguous chunks and runs
/// fn(chunk_index, begin, end) on each. Chunk boundaries depend only on n
/// and the thread cap, so callers that combine per-chunk partials in chunk
/// order get reproducible reductions. Nested calls run serially.
template <typename Fn>
void parallel_chunks(std::int64_t n, Fn&& fn) {
    if (n <= 0) return;
    const int workers =
        detail::inside_parallel_region() ? 1 : std::min<std::int64_t>(max_threads(), n);
    if (workers <= 1) {
        fn(0, std::int64_t{0}, n);
        return;
    }
    const std::int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers - 1));
    for (int c = 1; c < workers; ++c) {
        const std::int64_t b = c * chunk;
        const std::int64_t e = std::min<std::int64_t>(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, c, b, e] {
            detail::inside_parallel_region() = true;
            fn(c, b, e);
            detail::inside_parallel_region() = false;
        });
    }
    {
        detail::inside_parallel_region() = true;
        fn(0, std::int64_t{0}, std::min<std::int64_t>(n, chunk));
        detail::inside_parallel_region() = false;
    }
    for (auto& t : pool) t.join();
}

template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
    parallel_chunks(n, [&fn](int, std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) fn(i);
    });
}

} // namespace srnet
