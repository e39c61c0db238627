#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace windfuse::util {

// FNV-1a 64-bit. Content fingerprinting for manifests and frozen-parameter
// checks; not cryptographic.
inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v);

// Shortest round-trip decimal form of a double. Deterministic across runs,
// parses back to the identical bit pattern.
std::string fmt_double(double v);

// Parse a full string as double; returns false on trailing garbage or empty.
bool parse_double(std::string_view s, double& out);

std::string to_lower(std::string_view s);

// RFC 4180 field: quoted when it contains a comma, quote or newline.
std::string csv_field(std::string_view s);

// Runs fn(i) for i in [0, n). Thread count capped by WINDFUSE_THREADS
// (default: hardware concurrency). Static contiguous chunking, so results
// written to per-index slots are schedule independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

std::size_t thread_cap();

}  // namespace windfuse::util
