#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hype {

// Worker/chunk controls shared by the batch stages. Chunk boundaries are a
// pure function of (count, chunk_size), so anything accumulated per chunk
// and combined in chunk order is identical at every thread count.
struct ParallelConfig {
    unsigned threads = 0;  // 0 = hardware concurrency
    std::size_t chunk_size = 1024;

    unsigned resolved_threads() const {
        if (threads > 0) return threads;
        unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? hw : 1;
    }
};

inline std::size_t chunk_count(std::size_t count, std::size_t chunk_size) {
    if (chunk_size == 0) chunk_size = 1;
    return (count + chunk_size - 1) / chunk_size;
}

// Runs fn(chunk_index, begin, end) over fixed-size chunks of [0, count).
// Chunks are claimed from a shared counter; fn must only write to state
// owned by its chunk index.
template <typename Fn>
void for_each_chunk(std::size_t count, const ParallelConfig& cfg, Fn&& fn) {
    if (count == 0) return;
    std::size_t chunk_size = cfg.chunk_size == 0 ? 1 : cfg.chunk_size;
    std::size_t n_chunks = chunk_count(count, chunk_size);
    unsigned n_threads = cfg.resolved_threads();
    if (n_threads > n_chunks) n_threads = static_cast<unsigned>(n_chunks);

    if (n_threads <= 1) {
        for (std::size_t ci = 0; ci < n_chunks; ++ci) {
            std::size_t begin = ci * chunk_size;
            std::size_t end = std::min(begin + chunk_size, count);
            fn(ci, begin, end);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            std::size_t ci = next.fetch_add(1, std::memory_order_relaxed);
            if (ci >= n_chunks) break;
            std::size_t begin = ci * chunk_size;
            std::size_t end = std::min(begin + chunk_size, count);
            try {
                fn(ci, begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                break;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace hype
