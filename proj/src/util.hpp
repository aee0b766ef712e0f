#pragma once

// Internal helpers shared by the library translation units.

#include "seq2cause/core.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace s2c::detail {

// Runs fn(0..n-1) on `workers` threads. Callers write results into
// preallocated per-index slots, so scheduling never affects output. The
// lowest-index exception wins to keep error reporting deterministic.
template <typename F>
void parallel_for(int n, int workers, F&& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    int err_index = n;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (i < err_index) {
                        err_index = i;
                        err = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// Compact float for CSV cells: %.6g with integral values kept short.
inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline void softmax_into(std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : logits) v /= sum;
}

}  // namespace s2c::detail
