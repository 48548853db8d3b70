#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace noilin {

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive an independent stream seed from a run seed and any number of
/// discriminators (epoch, batch index, stream tag).
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (auto p : parts) h = mix64(h ^ mix64(p));
    return h;
}

// Stream tags keep the random streams of different consumers apart.
enum class Stream : std::uint64_t {
    shuffle = 1,
    attack_start = 2,
    flip_attack = 3,
    flip_loss = 4,
    flip_epoch = 5,
    eval_attack = 6,
    init = 7,
    split = 8,
    similarity = 9,
    tracked = 10,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream s, std::uint64_t a = 0, std::uint64_t b = 0) {
    return derive_seed({seed, static_cast<std::uint64_t>(s), a, b});
}

}  // namespace noilin
