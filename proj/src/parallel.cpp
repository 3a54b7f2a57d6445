#include "kinv/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

namespace kinv {

namespace {
std::atomic<int> g_max_threads{0}; // 0 = hardware default

int hardware_default() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}
} // namespace

int max_threads() {
    int n = g_max_threads.load(std::memory_order_relaxed);
    return n <= 0 ? hardware_default() : n;
}

void set_max_threads(int n) {
    g_max_threads.store(n, std::memory_order_relaxed);
}

void parallel_for(int n, const std::function<void(int, int)>& fn, int grain) {
    if (n <= 0) return;
    int workers = std::min(max_threads(), (n + grain - 1) / std::max(grain, 1));
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    // Fixed contiguous partition: chunk boundaries depend only on n and the
    // worker count, never on scheduling.
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    std::exception_ptr first_error = nullptr;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        int begin = static_cast<int>(static_cast<long long>(n) * w / workers);
        int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
        pool.emplace_back([&, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace kinv
