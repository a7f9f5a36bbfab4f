#ifndef BPRE_PARALLEL_HPP
#define BPRE_PARALLEL_HPP

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace bpre {

// Worker count: hardware concurrency, capped by BPRELAB_THREADS when set.
inline int worker_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("BPRELAB_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && cap < n) n = static_cast<int>(cap);
        if (cap >= 1 && cap > n) n = static_cast<int>(cap);
    }
    return n;
}

// Splits [0, total) into a fixed number of blocks and runs
// fn(block_index, begin, end) once per block. The block layout does not
// depend on the worker count, and each block is processed by exactly one
// worker, so block-local results combined in block order are bit-identical
// no matter how many threads run.
inline void for_each_block(int64_t total, int n_blocks,
                           const std::function<void(int, int64_t, int64_t)>& fn) {
    if (total <= 0) return;
    if (n_blocks > total) n_blocks = static_cast<int>(total);
    if (n_blocks < 1) n_blocks = 1;

    const int workers = std::min(worker_count(), n_blocks);
    std::atomic<int> next{0};
    auto drain = [&]() {
        for (;;) {
            const int b = next.fetch_add(1);
            if (b >= n_blocks) break;
            const int64_t begin = total * b / n_blocks;
            const int64_t end = total * (b + 1) / n_blocks;
            fn(b, begin, end);
        }
    };

    if (workers <= 1) {
        drain();
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(drain);
    for (auto& t : pool) t.join();
}

// Default block count for replica-parallel estimators.
inline constexpr int kReplicaBlocks = 64;

}  // namespace bpre

#endif
