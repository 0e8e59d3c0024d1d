#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

// Counter-based random number generation. Every draw is a pure function of a
// 64-bit key and a counter, so streams can be replayed, split across threads,
// and shifted in time without storing state. Mixing is the SplitMix64
// finalizer, which is cheap and passes the usual avalanche checks.

namespace d3gm {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives a child key; used to fan out (seed, stream, path, step) hierarchies.
inline constexpr std::uint64_t rng_chain(std::uint64_t key, std::uint64_t word) {
    return splitmix64(key ^ splitmix64(word + 0x632be59bd9b4e019ULL));
}

// Stream tags keep independent purposes on disjoint key subspaces.
namespace stream {
inline constexpr std::uint64_t forward = 1;   // forward Brownian increments
inline constexpr std::uint64_t reverse = 2;   // reverse-time noise
inline constexpr std::uint64_t init = 3;      // sampler initial states
inline constexpr std::uint64_t data = 4;      // data/degradation draws
inline constexpr std::uint64_t weights = 5;   // network initialization
inline constexpr std::uint64_t batch = 6;     // minibatch composition
}  // namespace stream

inline double uniform_from_bits(std::uint64_t bits) {
    // 53 high bits -> (0, 1]; never returns 0 so log() below is safe.
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two independent hashes of (key, counter).
inline double normal_scalar(std::uint64_t key, std::uint64_t counter) {
    const double u1 = uniform_from_bits(rng_chain(key, 2 * counter));
    const double u2 = uniform_from_bits(rng_chain(key, 2 * counter + 1));
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

inline double uniform_scalar(std::uint64_t key, std::uint64_t counter) {
    return uniform_from_bits(rng_chain(key, 2 * counter));
}

// A sequential view over one counter-based stream. Copying the stream and
// replaying it reproduces the same values; there is no hidden state.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : key_(key) {}

    RngStream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index)
        : key_(rng_chain(rng_chain(seed, tag), index)) {}

    double normal() { return normal_scalar(key_, counter_++); }
    double uniform() { return uniform_scalar(key_, counter_++); }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace d3gm
