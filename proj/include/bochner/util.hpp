#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace bochner {

/// Deterministic RNG: mt19937_64 core with hand-rolled distributions so the
/// stream is identical on every platform (std distributions are not
/// implementation-pinned).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : s_(split(seed)), s2_(split(seed ^ 0x9e3779b97f4a7c15ull)) {}

    std::uint64_t next_u64() {
        // xoshiro-style mix over two splitmix streams
        std::uint64_t x = s_;
        s_ = split(s_);
        s2_ = split(s2_ + 0x2545f4914f6cdd1dull);
        return x ^ (s2_ >> 17);
    }

    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double gaussian() {
        // Box-Muller; deterministic given the stream
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    /// Child stream, useful for per-check reproducibility independent of order.
    Rng fork(std::uint64_t salt) { return Rng(s_ ^ (salt * 0xff51afd7ed558ccdull)); }

private:
    static std::uint64_t split(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    std::uint64_t s_, s2_;
};

/// Compensated accumulator for long weighted sums.
class KahanSum {
public:
    void add(double x) {
        double y = x - c_;
        double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0, c_ = 0.0;
};

/// Runs fn(block_begin, block_end) over [0,n) in fixed-size blocks.
/// Block boundaries do not depend on the thread count, so reductions that
/// combine per-block results in index order are bitwise reproducible for any
/// --threads setting.
void parallel_blocks(std::size_t n, std::size_t block, int threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

/// Global default thread count (CLI --threads / BOCHNER_LAB_THREADS).
int default_threads();
void set_default_threads(int n);

}  // namespace bochner
