#include "verdoc/util.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "verdoc/error.hpp"

namespace verdoc {

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view component) {
    std::uint64_t h = 1469598103934665603ULL;
    for (int i = 0; i < 8; ++i) {
        h ^= (global_seed >> (8 * i)) & 0xff;
        h *= 1099511628211ULL;
    }
    for (char c : component) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    h += 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

std::size_t default_workers() {
    auto n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("VERDOC_LOG");
        std::string v = env ? env : "";
        if (v == "error") return LogLevel::Error;
        if (v == "info") return LogLevel::Info;
        if (v == "debug") return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

void log(LogLevel level, const std::string& message) {
    if (level > log_level()) return;
    static std::mutex mu;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << "[verdoc " << names[static_cast<int>(level)] << "] " << message << '\n';
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed for " + path);
}

}  // namespace verdoc
