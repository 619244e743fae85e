#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace verdoc {

/// Component seed: FNV-1a over the global seed bytes and the component name, then splitmix64.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view component);

std::size_t default_workers();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// processed exactly once; callers write results by index, so output does not
/// depend on the worker count. The first exception is rethrown.
template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto run = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                next.store(n);
            }
        }
    };
    std::vector<std::thread> pool;
    std::size_t count = std::min(workers, n);
    for (std::size_t t = 0; t + 1 < count; ++t) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Level from VERDOC_LOG (error|warn|info|debug), default warn.
LogLevel log_level();
void log(LogLevel level, const std::string& message);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace verdoc
