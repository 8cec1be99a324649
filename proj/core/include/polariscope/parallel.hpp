#ifndef POLARISCOPE_PARALLEL_HPP
#define POLARISCOPE_PARALLEL_HPP

#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace polariscope {

/// Worker cap for direction sweeps: POLARISCOPE_THREADS when set (min 1),
/// otherwise the hardware concurrency.
inline unsigned thread_cap() {
    if (const char* env = std::getenv("POLARISCOPE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
        return 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Strided index-parallel loop.  fn(i) must only write to per-index slots so
/// results are identical for any worker count; the first exception thrown by a
/// worker is rethrown on the calling thread.
template <typename F>
void parallel_for(size_t n, F&& fn) {
    const unsigned workers = std::min<size_t>(thread_cap(), n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace polariscope

#endif
