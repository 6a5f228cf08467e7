#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace loschmidt {

// Run body(i) for i in [0, count) across up to `workers` threads.  Work is
// handed out in fixed-size blocks; each index writes only its own slots, so
// results are byte-identical for any worker count.  Reductions over the
// filled buffers happen afterwards, single-threaded, in index order.
template <typename Body>
void parallel_for_indexed(std::size_t count, unsigned workers, Body&& body) {
    if (count == 0) return;
    if (workers == 0) workers = 1;
    const unsigned n_threads = static_cast<unsigned>(
        std::min<std::size_t>(workers, count));
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    constexpr std::size_t block = 16;
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    std::mutex mtx;
    std::size_t next = 0;
    std::exception_ptr error;
    for (unsigned t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t lo;
                {
                    std::lock_guard<std::mutex> lock(mtx);
                    if (next >= count || error) return;
                    lo = next;
                    next += block;
                }
                const std::size_t hi = std::min(lo + block, count);
                try {
                    for (std::size_t i = lo; i < hi; ++i) body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mtx);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace loschmidt
