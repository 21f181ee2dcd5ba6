#include "bochner/util.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace bochner {

namespace {
int g_threads = 0;
}

int default_threads() {
    if (g_threads > 0) return g_threads;
    const char* env = std::getenv("BOCHNER_LAB_THREADS");
    if (env) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void set_default_threads(int n) { g_threads = n; }

void parallel_blocks(std::size_t n, std::size_t block, int threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (block == 0) block = 4096;
    std::size_t nblocks = (n + block - 1) / block;
    if (threads <= 0) threads = default_threads();
    if (threads == 1 || nblocks <= 1) {
        for (std::size_t bi = 0; bi < nblocks; ++bi)
            fn(bi, bi * block, std::min(n, (bi + 1) * block));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t bi = next.fetch_add(1);
            if (bi >= nblocks) return;
            fn(bi, bi * block, std::min(n, (bi + 1) * block));
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads - 1; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

}  // namespace bochner
