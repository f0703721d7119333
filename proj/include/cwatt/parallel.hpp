// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace cwatt {

/**
 * @brief Runs fn(i) for i in [begin, end) on up to `threads` workers.
 *
 * Work is handed out through an atomic counter, so results must be written
 * to per-index slots; with that discipline output is identical for any
 * worker count. The first exception thrown by any worker is rethrown.
 */
inline void parallel_for(int begin, int end, int threads, const std::function<void(int)>& fn) {
    int n = end - begin;
    if (n <= 0) return;
    if (threads < 1) threads = 1;
    if (threads == 1 || n == 1) {
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }
    threads = std::min(threads, n);

    std::atomic<int> next(begin);
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= end) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace cwatt
