// Copyright Contributors to the evsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace evsplat::detail {

/// Runs fn(i) for i in [0, count). Work items are independent; callers reduce
/// per-item results in index order so output never depends on `threads`.
template <typename Fn>
void
parallel_for(int count, int threads, Fn &&fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<int>   next{0};
    std::exception_ptr error;
    std::mutex         error_mutex;
    auto               worker = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::jthread> pool;
    const int                 n = std::min(threads, count);
    for (int t = 0; t < n; ++t) {
        pool.emplace_back(worker);
    }
    pool.clear();
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace evsplat::detail
