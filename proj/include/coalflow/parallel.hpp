// Deterministic replica-parallel reduction. Replicas are cut into fixed-size
// chunks; workers claim chunks dynamically but partial aggregates are merged
// strictly in chunk order, so the result is bit-identical for any worker
// count. Replica r always uses RNG stream base.replica(r), which is
// scheduling-independent by construction.
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

namespace coalflow {

// COALFLOW_THREADS when set, hardware concurrency otherwise.
int worker_count();

inline constexpr std::uint64_t kReplicaChunk = 1024;

template <class Acc, class Body>
Acc parallel_replicas(std::uint64_t replicas, Body&& body) {
    Acc global{};
    if (replicas == 0) return global;
    const std::uint64_t nchunks = (replicas + kReplicaChunk - 1) / kReplicaChunk;
    int workers = worker_count();
    if (workers < 1) workers = 1;
    if (static_cast<std::uint64_t>(workers) > nchunks)
        workers = static_cast<int>(nchunks);

    const auto run_chunk = [&](std::uint64_t c, Acc& local) {
        const std::uint64_t lo = c * kReplicaChunk;
        const std::uint64_t hi = std::min(replicas, lo + kReplicaChunk);
        for (std::uint64_t r = lo; r < hi; ++r)
            body(r, local);
    };

    if (workers == 1) {
        // same per-chunk merge sequence as the threaded path
        for (std::uint64_t c = 0; c < nchunks; ++c) {
            Acc local{};
            run_chunk(c, local);
            global.merge(local);
        }
        return global;
    }

    std::mutex mu;
    std::condition_variable cv;
    std::map<std::uint64_t, Acc> ready;
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::uint64_t c = next.fetch_add(1);
                if (c >= nchunks) break;
                Acc local{};
                try {
                    run_chunk(c, local);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(mu);
                    if (!failure) failure = std::current_exception();
                    cv.notify_all();
                    break;
                }
                {
                    std::lock_guard<std::mutex> lk(mu);
                    ready.emplace(c, std::move(local));
                }
                cv.notify_all();
            }
        });
    }

    std::uint64_t merged = 0;
    {
        std::unique_lock<std::mutex> lk(mu);
        while (merged < nchunks && !failure) {
            cv.wait(lk, [&] { return failure || ready.count(merged) > 0; });
            while (!failure && ready.count(merged) > 0) {
                auto node = ready.extract(merged);
                lk.unlock();
                global.merge(node.mapped());
                lk.lock();
                ++merged;
            }
        }
        if (failure) next.store(nchunks); // stop remaining workers
    }
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
    return global;
}

} // namespace coalflow
