#pragma once

#include <cstdint>

namespace factorspace {

// Every random stream is derived from the experiment master seed by mixing
// in a purpose tag and an ordinal (restart number, split number, ...).
enum class SeedPurpose : std::uint64_t {
    train_init = 1,
    mds_init = 2,
    splits = 3,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, SeedPurpose purpose, std::uint64_t ordinal) {
    return splitmix64(splitmix64(master ^ (static_cast<std::uint64_t>(purpose) << 56)) + ordinal);
}

}  // namespace factorspace
