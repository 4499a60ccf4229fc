#include "mcva/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace mcva {
namespace {

int g_requested_threads = 0;
thread_local bool g_inside_parallel = false;

struct Pool {
    std::vector<std::thread> workers;
    std::mutex mu;
    std::condition_variable cv_work;
    std::condition_variable cv_done;

    // Current job
    const std::function<void(std::int64_t, std::int64_t)>* fn = nullptr;
    std::int64_t begin = 0, end = 0, chunk = 1;
    std::atomic<std::int64_t> next{0};
    std::atomic<int> active{0};
    std::uint64_t generation = 0;
    bool stop = false;

    explicit Pool(int n) {
        for (int i = 0; i < n; ++i) {
            workers.emplace_back([this] { worker_loop(); });
        }
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(mu);
            stop = true;
        }
        cv_work.notify_all();
        for (auto& t : workers) t.join();
    }

    void run_chunks() {
        for (;;) {
            const std::int64_t lo = next.fetch_add(chunk);
            if (lo >= end) break;
            const std::int64_t hi = lo + chunk < end ? lo + chunk : end;
            (*fn)(lo, hi);
        }
    }

    void worker_loop() {
        g_inside_parallel = true; // nested parallel_for from a worker runs inline
        std::uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lk(mu);
                cv_work.wait(lk, [&] { return stop || generation != seen; });
                if (stop) return;
                seen = generation;
            }
            run_chunks();
            if (active.fetch_sub(1) == 1) {
                // lock pairs the active-count write with the caller's
                // predicate check, otherwise the wakeup can be lost
                std::lock_guard<std::mutex> lk(mu);
                cv_done.notify_all();
            }
        }
    }

    void run(std::int64_t b, std::int64_t e,
             const std::function<void(std::int64_t, std::int64_t)>& f) {
        const int nworkers = static_cast<int>(workers.size());
        {
            std::lock_guard<std::mutex> lk(mu);
            fn = &f;
            begin = b;
            end = e;
            const std::int64_t n = e - b;
            const std::int64_t pieces = 4 * (nworkers + 1);
            chunk = n / pieces > 0 ? n / pieces : 1;
            next.store(b);
            active.store(nworkers);
            ++generation;
        }
        cv_work.notify_all();
        run_chunks(); // caller participates
        std::unique_lock<std::mutex> lk(mu);
        cv_done.wait(lk, [&] { return active.load() == 0; });
        fn = nullptr;
    }
};

Pool* pool_instance() {
    static Pool* pool = nullptr;
    static int pool_threads = -1;
    int want = g_requested_threads;
    if (want <= 0) want = static_cast<int>(std::thread::hardware_concurrency());
    if (want < 1) want = 1;
    if (pool == nullptr || pool_threads != want) {
        delete pool;
        pool = new Pool(want - 1); // caller counts as one executor
        pool_threads = want;
    }
    return pool;
}

} // namespace

void set_num_threads(int n) { g_requested_threads = n; }

int num_threads() {
    int want = g_requested_threads;
    if (want <= 0) want = static_cast<int>(std::thread::hardware_concurrency());
    return want < 1 ? 1 : want;
}

void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (end <= begin) return;
    if (g_inside_parallel || num_threads() == 1 || end - begin == 1) {
        fn(begin, end);
        return;
    }
    g_inside_parallel = true;
    pool_instance()->run(begin, end, fn);
    g_inside_parallel = false;
}

} // namespace mcva
