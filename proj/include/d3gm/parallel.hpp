#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace d3gm {

// Fixed-size work chunks are the unit of both scheduling and reduction.
// Workers grab chunks in any order, but every chunk writes to its own slot
// and the caller folds slots in chunk order afterwards, so results do not
// depend on the number of threads. Keep this constant stable: changing it
// changes summation order and therefore output bytes.
inline constexpr std::size_t kChunkSize = 256;

inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// Runs body(chunk_index, begin, end) over [0, n) in chunks of kChunkSize.
// Chunks never overlap; body must only touch state owned by its chunk slot.
template <typename Body>
void parallel_chunks(std::size_t n, unsigned n_threads, Body&& body) {
    const std::size_t n_chunks = (n + kChunkSize - 1) / kChunkSize;
    const unsigned threads = std::min<std::size_t>(resolve_threads(n_threads),
                                                   n_chunks ? n_chunks : 1);
    if (threads <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) {
            const std::size_t lo = c * kChunkSize;
            body(c, lo, std::min(n, lo + kChunkSize));
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            if (stop.load(std::memory_order_relaxed)) return;
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            const std::size_t lo = c * kChunkSize;
            try {
                body(c, lo, std::min(n, lo + kChunkSize));
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                stop.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// Streaming mean/M2 accumulator (Welford). Merge order must be fixed by the
// caller; merging chunk slots in index order keeps reductions deterministic.
struct RunningMoments {
    double count = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        count += 1.0;
        const double d1 = x - mean;
        mean += d1 / count;
        m2 += d1 * (x - mean);
    }

    void merge(const RunningMoments& other) {
        if (other.count == 0.0) return;
        if (count == 0.0) {
            *this = other;
            return;
        }
        const double total = count + other.count;
        const double delta = other.mean - mean;
        mean += delta * other.count / total;
        m2 += other.m2 + delta * delta * count * other.count / total;
        count = total;
    }

    double variance_unbiased() const {
        return count > 1.0 ? m2 / (count - 1.0) : 0.0;
    }
};

}  // namespace d3gm
