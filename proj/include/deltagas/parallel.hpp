#pragma once

#include <atomic>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace deltagas {

/// Compensated (Kahan) accumulator.
template <class T>
class KahanSum {
public:
    void add(const T& v) {
        const T y = v - comp_;
        const T t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    T value() const { return sum_; }

private:
    T sum_{};
    T comp_{};
};

inline int worker_count() {
    if (const char* env = std::getenv("DELTAGAS_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Splits [0, count) into a fixed number of chunks (independent of the thread
/// count), evaluates `chunk_sum(begin, end)` for each, and combines the chunk
/// results in chunk order. The reduction order is therefore bit-stable no
/// matter how many threads run.
template <class T, class F>
T deterministic_reduce(std::int64_t count, F&& chunk_sum) {
    if (count <= 0) return T{};
    const std::int64_t max_chunks = 256;
    const std::int64_t chunks = std::min<std::int64_t>(max_chunks, count);
    const std::int64_t step = (count + chunks - 1) / chunks;

    std::vector<T> partial(static_cast<std::size_t>(chunks));
    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        try {
            for (;;) {
                const std::int64_t c = next.fetch_add(1);
                if (c >= chunks) break;
                const std::int64_t b = c * step;
                const std::int64_t e = std::min(count, b + step);
                partial[static_cast<std::size_t>(c)] = chunk_sum(b, e);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
            next.store(chunks); // stop remaining chunks
        }
    };

    const int nthreads = static_cast<int>(std::min<std::int64_t>(worker_count(), chunks));
    if (nthreads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    KahanSum<T> total;
    for (const auto& p : partial) total.add(p);
    return total.value();
}

} // namespace deltagas
