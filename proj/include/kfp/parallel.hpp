#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace kfp {

/// Runs body(lo, hi) over a static contiguous partition of [0, n).  Each item
/// is owned by exactly one chunk, so per-item writes need no synchronization
/// and results do not depend on the schedule.
template <class Body>
void parallel_for(std::int64_t n, int threads, Body&& body) {
    if (n <= 0) return;
    const std::int64_t workers =
        std::max<std::int64_t>(1, std::min<std::int64_t>(threads, n));
    if (workers == 1) {
        body(std::int64_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::int64_t chunk = (n + workers - 1) / workers;
    for (std::int64_t w = 0; w < workers; ++w) {
        const std::int64_t lo = w * chunk;
        const std::int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace kfp
