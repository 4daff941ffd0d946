#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace engage {

/// Runs fn(i) for i in [0, count) on up to `jobs` threads.
///
/// Work is claimed dynamically, so fn must write its result to a slot owned
/// by index i. The first exception thrown (lowest index wins) is rethrown
/// after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn)
{
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::size_t error_index = count;

    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (i < error_index) {
                    error_index = i;
                    error = std::current_exception();
                }
            }
        }
    };

    {
        std::vector<std::jthread> threads;
        threads.reserve(jobs);
        for (std::size_t t = 0; t < jobs; ++t) {
            threads.emplace_back(worker);
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

} // namespace engage
