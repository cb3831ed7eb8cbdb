#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace flownas {

// Worker count for the engine's batch-parallel loops. Results are identical
// for any value: work is split into a fixed number of chunks and reductions
// always combine chunks in index order.
inline int& engine_jobs() {
    static int jobs = 1;
    return jobs;
}

constexpr long kGradChunks = 8;

inline std::pair<long, long> chunk_range(long total, long n_chunks, long chunk) {
    long base = total / n_chunks, rem = total % n_chunks;
    long begin = chunk * base + std::min(chunk, rem);
    long end = begin + base + (chunk < rem ? 1 : 0);
    return {begin, end};
}

// Runs fn(chunk) for chunk in [0, n_chunks) across up to engine_jobs()
// threads. fn must not touch shared mutable state outside its chunk.
inline void parallel_chunks(long n_chunks, const std::function<void(long)>& fn) {
    int jobs = engine_jobs();
    if (jobs <= 1 || n_chunks <= 1) {
        for (long c = 0; c < n_chunks; ++c) fn(c);
        return;
    }
    std::atomic<long> next{0};
    auto worker = [&] {
        for (;;) {
            long c = next.fetch_add(1);
            if (c >= n_chunks) return;
            fn(c);
        }
    };
    long n_threads = std::min<long>(jobs, n_chunks);
    std::vector<std::thread> threads;
    threads.reserve(size_t(n_threads - 1));
    for (long i = 1; i < n_threads; ++i) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
}

} // namespace flownas
