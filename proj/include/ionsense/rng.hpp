#pragma once

#include <cstdint>
#include <random>

namespace ionsense {

/// splitmix64 finalizer; decorrelates structured seed inputs.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Deterministic per-stream seed from a master seed and a stream index
/// (frame number, trial number, axis, ...). Streams never share state, so
/// serial and parallel execution draw identical variates.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return mix64(mix64(master) ^ mix64(stream + 0x243f6a8885a308d3ull));
}

inline std::mt19937_64 make_engine(std::uint64_t master, std::uint64_t stream) {
    return std::mt19937_64(derive_seed(master, stream));
}

} // namespace ionsense
