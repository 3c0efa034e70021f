#ifndef GRUV_PARALLEL_HPP
#define GRUV_PARALLEL_HPP

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

/**
 * @file parallel.hpp
 *
 * @brief Static-partition parallel loop.
 *
 * Each task index is processed exactly once and writes only its own output slot,
 * so results do not depend on the number of workers.
 */

namespace gruv {

/**
 * Worker count from the `GRUV_THREADS` environment variable, falling back to the hardware concurrency.
 */
inline int default_threads() {
    if (const char* env = std::getenv("GRUV_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) {
                return n;
            }
        } catch (...) {
        }
    }
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

/**
 * Run `fun(i)` for `i` in `[0, ntasks)` on up to `nthreads` workers.
 * The first exception thrown by any task is rethrown on the calling thread.
 */
template<class Function>
void parallel_for(std::size_t ntasks, int nthreads, Function fun) {
    const auto workers = static_cast<std::size_t>(std::max(1, nthreads));
    if (workers == 1 || ntasks <= 1) {
        for (std::size_t i = 0; i < ntasks; ++i) {
            fun(i);
        }
        return;
    }

    const std::size_t used = std::min(workers, ntasks);
    const std::size_t per = ntasks / used, extra = ntasks % used;
    std::exception_ptr failure;
    std::mutex lock;

    std::vector<std::thread> pool;
    pool.reserve(used);
    std::size_t start = 0;
    for (std::size_t w = 0; w < used; ++w) {
        const std::size_t len = per + (w < extra ? 1 : 0);
        pool.emplace_back([&, start, len]() {
            try {
                for (std::size_t i = start; i < start + len; ++i) {
                    fun(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> guard(lock);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        });
        start += len;
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

}

#endif
