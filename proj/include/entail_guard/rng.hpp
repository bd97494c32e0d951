#pragma once

#include <cstdint>
#include <string_view>

// Seed derivation and shuffling used across the project. Everything here is
// fixed-algorithm and platform-independent so that seeded runs reproduce
// byte-identically everywhere; std::hash / std::shuffle give no such promise.

namespace entail_guard {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(a) ^ (b + 0x9E3779B97F4A7C15ull));
}

constexpr std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

    constexpr std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Unbiased integer in [0, bound) via rejection sampling.
    constexpr std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % bound;
    }

    // Uniform double in [0, 1) with 53 random bits.
    constexpr double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

// Per-cell seed for batch runs: base seed plus a stable hash of the item position.
constexpr std::uint64_t batch_cell_seed(std::uint64_t base, std::uint64_t prompt_index,
                                        std::uint64_t cell_index) {
    return base + hash_combine(prompt_index, cell_index);
}

// Per-attempt sampling seed inside a run, so retries draw fresh continuations
// while reruns with the same base seed reproduce exactly.
constexpr std::uint64_t attempt_seed(std::uint64_t base, std::uint64_t run_index,
                                     std::uint64_t attempt_index) {
    return hash_combine(hash_combine(base, run_index), attempt_index);
}

}  // namespace entail_guard
