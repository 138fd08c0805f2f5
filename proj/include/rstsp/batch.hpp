#pragma once

// Parallel solving over a batch of instances. Each worker owns its search
// state; per-instance seeds come from (seed, instance id), so results do not
// depend on the thread count or on scheduling.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rstsp/rbs.hpp"

namespace rstsp {

/// --threads default: RESCALE_TSP_THREADS if set and positive, else the
/// hardware concurrency.
inline std::size_t default_thread_count() {
    if (const char* env = std::getenv("RESCALE_TSP_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers pulling indices
/// from a shared counter. The first exception is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mu;
    auto work = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    pool.clear();
    if (error) std::rethrow_exception(error);
}

/// Seed used for one instance of a batch.
inline std::uint64_t instance_seed(std::uint64_t seed, const Instance& inst) { return derive_seed(seed, inst.id()); }

/// Solves every instance. `heatmaps` is empty (k-NN candidates) or parallel to
/// `instances`.
inline std::vector<SolveResult> solve_batch(const std::vector<Instance>& instances, const std::vector<Heatmap>& heatmaps,
                                            const SolveConfig& cfg, std::size_t threads) {
    if (!heatmaps.empty() && heatmaps.size() != instances.size()) {
        throw ArgumentError("got " + std::to_string(heatmaps.size()) + " heatmaps for " + std::to_string(instances.size()) + " instances");
    }
    std::vector<SolveResult> out(instances.size());
    parallel_for(instances.size(), threads, [&](std::size_t i) {
        SolveConfig c = cfg;
        c.seed = instance_seed(cfg.seed, instances[i]);
        out[i] = solve(instances[i], heatmaps.empty() ? nullptr : &heatmaps[i], c);
    });
    return out;
}

}  // namespace rstsp
