#pragma once

#include <algorithm>
#include <atomic>
#include <barrier>
#include <cstdint>
#include <thread>
#include <vector>

namespace renv {

inline int effective_workers(int requested, std::int64_t n_items) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 4;
    if (requested <= 0) requested = hw;
    return static_cast<int>(std::min<std::int64_t>(requested, std::max<std::int64_t>(1, n_items)));
}

// Static partition of [0,n) over `workers` threads.  fn(begin, end, worker).
template <class Fn>
void parallel_for(std::int64_t n, int workers, Fn&& fn) {
    workers = effective_workers(workers, n);
    if (workers == 1) {
        fn(std::int64_t{0}, n, 0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::int64_t b = std::min<std::int64_t>(n, w * chunk);
        const std::int64_t e = std::min<std::int64_t>(n, b + chunk);
        pool.emplace_back([&fn, b, e, w] { fn(b, e, w); });
    }
    for (auto& t : pool) t.join();
}

enum class StepControl { advance, repeat, stop };

// Lock-step rounds over a shared item range.  In round k every worker runs
// work(k, begin, end, worker) on its slice; when all slices are done,
// serial(k) runs exactly once before the next round.  serial may request a
// repeat of the same round (workers must then recompute it bit-identically)
// or an early stop.
template <class Work, class Serial>
void step_parallel(std::int64_t n_items, int workers, std::int64_t n_steps,
                   Work&& work, Serial&& serial) {
    workers = effective_workers(workers, n_items);
    if (n_steps <= 0) return;
    if (workers == 1) {
        std::int64_t k = 0;
        while (k < n_steps) {
            work(k, std::int64_t{0}, n_items, 0);
            switch (serial(k)) {
                case StepControl::advance: ++k; break;
                case StepControl::repeat: break;
                case StepControl::stop: return;
            }
        }
        return;
    }

    std::atomic<std::int64_t> step{0};
    auto on_complete = [&]() noexcept {
        const std::int64_t k = step.load(std::memory_order_relaxed);
        switch (serial(k)) {
            case StepControl::advance:
                step.store(k + 1, std::memory_order_relaxed);
                break;
            case StepControl::repeat:
                break;
            case StepControl::stop:
                step.store(n_steps, std::memory_order_relaxed);
                break;
        }
    };
    std::barrier sync(workers, on_complete);

    const std::int64_t chunk = (n_items + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        const std::int64_t b = std::min<std::int64_t>(n_items, w * chunk);
        const std::int64_t e = std::min<std::int64_t>(n_items, b + chunk);
        pool.emplace_back([&, b, e, w] {
            while (true) {
                const std::int64_t k = step.load(std::memory_order_acquire);
                if (k >= n_steps) break;
                work(k, b, e, w);
                sync.arrive_and_wait();
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace renv
