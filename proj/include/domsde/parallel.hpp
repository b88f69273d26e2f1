#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace domsde
{
    /// Calls fn(i) for i in [0, n) on `workers` threads. Indices are handed out
    /// dynamically; fn must only write to storage owned by index i. The first
    /// exception thrown by any call is rethrown after all threads have joined.
    template <class Fn>
    void parallel_for(std::size_t n, std::size_t workers, Fn &&fn)
    {
        workers = std::max<std::size_t>(1, std::min(workers, n));
        if (workers == 1)
        {
            for (std::size_t i = 0; i < n; ++i)
                fn(i);
            return;
        }

        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::exception_ptr error;
        std::mutex error_mutex;

        auto body = [&]() {
            while (!failed.load(std::memory_order_relaxed))
            {
                const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n)
                    return;
                try
                {
                    fn(i);
                }
                catch (...)
                {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                    failed.store(true);
                }
            }
        };

        std::vector<std::thread> pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w)
            pool.emplace_back(body);
        body();
        for (auto &th : pool)
            th.join();
        if (error)
            std::rethrow_exception(error);
    }
}
