#include "toriqp/parallel.hpp"

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace toriqp {

namespace {
int g_threads = 0;
}

void set_thread_count(int n) { g_threads = n < 0 ? 0 : n; }

int thread_count() {
    if (g_threads > 0) return g_threads;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int n, const std::function<void(int)>& fn) {
    const int workers = thread_count();
    if (n <= 0) return;
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
#ifdef _OPENMP
    if (workers > 1 && n > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(workers)
        for (int i = 0; i < n; ++i) {
            if (failed.load(std::memory_order_relaxed)) continue;
            try {
                fn(i);
            } catch (...) {
#pragma omp critical(toriqp_parallel_err)
                {
                    if (!failed.exchange(true)) first_error = std::current_exception();
                }
            }
        }
        if (first_error) std::rethrow_exception(first_error);
        return;
    }
#endif
    (void)workers;
    for (int i = 0; i < n; ++i) fn(i);
}

} // namespace toriqp
