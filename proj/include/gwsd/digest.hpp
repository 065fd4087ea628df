#pragma once

// FNV-1a 64-bit content digests for run manifests. Not cryptographic;
// just a stable fingerprint to tell whether two runs produced the same
// bytes.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>

#include "gwsd/errors.hpp"

namespace gwsd {

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string digest_string(const std::string& s) {
    return hex64(fnv1a64(s.data(), s.size()));
}

inline std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw validation_error("cannot open file for digest: " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return hex64(h);
}

} // namespace gwsd
