#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace morphbench {

// FNV-1a 64-bit. Used for content checksums in manifests and for run ids.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

std::string to_hex(std::uint64_t v);

}  // namespace morphbench
