#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ofcl {

using Rng = std::mt19937_64;

// Derives an independent generator from a master seed, a stream name and an
// index (client id, task id, ...). Streams with different names or indices are
// decorrelated through std::seed_seq, so per-client randomness never depends on
// the order in which clients are scheduled.
Rng make_stream(std::uint64_t master_seed, std::string_view name, std::uint64_t index = 0);

// 64-bit FNV-1a, used for stream names and parameter checksums.
std::uint64_t fnv1a(const void* data, std::size_t size,
                    std::uint64_t hash = 0xcbf29ce484222325ULL) noexcept;

}  // namespace ofcl
