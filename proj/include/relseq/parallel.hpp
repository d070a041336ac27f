#pragma once

// Minimal fork-join helper. RELSEQ_THREADS caps the worker count. Callers
// must only use it for index-disjoint work so parallel and serial runs are
// bit-identical.

#include <cstdlib>
#include <thread>
#include <vector>

namespace relseq {

inline unsigned max_threads() {
    if (const char* env = std::getenv("RELSEQ_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned threads = max_threads();
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace relseq
