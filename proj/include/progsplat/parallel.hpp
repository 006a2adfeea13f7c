// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace progsplat {

inline int default_worker_count() {
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Static partition of [0, count) into `workers` contiguous chunks. Chunk w
/// always covers the same range for a given (count, workers), and the calling
/// thread runs chunk 0. fn(begin, end, worker_index).
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
    workers = std::max(1, workers);
    const std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(workers), std::max<std::size_t>(count, 1));
    if (chunks <= 1) {
        fn(std::size_t{0}, count, 0);
        return;
    }
    const std::size_t step = (count + chunks - 1) / chunks;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto run = [&](std::size_t w) {
        const std::size_t begin = std::min(count, w * step);
        const std::size_t end = std::min(count, begin + step);
        try {
            fn(begin, end, static_cast<int>(w));
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(chunks - 1);
    for (std::size_t w = 1; w < chunks; ++w) threads.emplace_back(run, w);
    run(0);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace progsplat
