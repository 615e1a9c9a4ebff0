#pragma once

#include <cstdint>

namespace atlab {

// splitmix64 finalizer. Good avalanche, trivially portable.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from (seed, stream tag, index).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t index = 0) {
    std::uint64_t h = mix64(seed ^ 0x2545f4914f6cdd1dull);
    h = mix64(h ^ stream);
    h = mix64(h ^ index);
    return h;
}

// Named stream tags so unrelated consumers of one master seed never collide.
namespace stream {
inline constexpr std::uint64_t kModelInit = 0x6d6f64656cull;  // "model"
inline constexpr std::uint64_t kData = 0x64617461ull;         // "data"
inline constexpr std::uint64_t kEpoch = 0x65706f6368ull;      // "epoch"
inline constexpr std::uint64_t kShuffle = 0x73687566ull;      // "shuf"
inline constexpr std::uint64_t kAttack = 0x6174746bull;       // "attk"
inline constexpr std::uint64_t kEval = 0x6576616cull;         // "eval"
inline constexpr std::uint64_t kDirection = 0x646972ull;      // "dir"
}  // namespace stream

// Deterministic seeded generator: splitmix64 state, Box-Muller gaussians.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller; the spare is cached per generator.
    double gaussian();

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace atlab
