#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include <omp.h>

namespace rdm {

// Row-parallel loop. Each index runs the same code path whether serial or
// parallel, so per-row results are bit-identical for any thread count.
// threads <= 1 is the serial reference path.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
        f(static_cast<std::size_t>(i));
}

// Contiguous chunk [begin, end) per worker; used where each worker carries
// private accumulation state that is later reduced in worker order.
inline std::pair<std::size_t, std::size_t> chunk_range(std::size_t n, int nchunks, int c) {
    std::size_t base = n / nchunks, rem = n % nchunks;
    std::size_t begin = c * base + (static_cast<std::size_t>(c) < rem ? c : rem);
    std::size_t len = base + (static_cast<std::size_t>(c) < rem ? 1 : 0);
    return {begin, begin + len};
}

inline int hardware_threads() { return omp_get_max_threads(); }

}  // namespace rdm
