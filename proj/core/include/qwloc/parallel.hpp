#ifndef QWLOC_PARALLEL_HPP
#define QWLOC_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace qwloc {

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). Work is strided so results land at fixed indices; the first
/// exception is rethrown after all workers join.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    unsigned nw = threads == 0 ? std::thread::hardware_concurrency() : threads;
    if (nw == 0) nw = 1;
    if (nw > n) nw = static_cast<unsigned>(n);
    if (nw == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(nw);
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (unsigned t = 0; t < nw; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += nw) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace qwloc

#endif
