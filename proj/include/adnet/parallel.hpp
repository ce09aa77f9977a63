#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace adnet {

// Execution policy shared by every kernel. threads == 1 is the reference
// (deterministic) mode. Kernels only parallelize across independent output
// elements, so per-element accumulation order never depends on the thread
// count; the flag exists as a hard guarantee and for debugging.
struct ExecPolicy {
    int threads = 1;

    static ExecPolicy serial() { return ExecPolicy{1}; }
    static ExecPolicy parallel(int max_threads = 0);

    bool is_serial() const { return threads <= 1; }
};

// Splits [0, n) into contiguous chunks, one per worker. fn(begin, end) must
// not touch another chunk's outputs. Runs inline when the range is small.
template <typename Fn>
void parallel_for(std::size_t n, const ExecPolicy& policy, Fn&& fn) {
    if (n == 0) return;
    const std::size_t want = policy.threads <= 0 ? 1 : static_cast<std::size_t>(policy.threads);
    const std::size_t workers = std::min({want, n});
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t b = w * chunk;
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    fn(std::size_t{0}, std::min(n, chunk));
    for (auto& t : pool) t.join();
}

} // namespace adnet
