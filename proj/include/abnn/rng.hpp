#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <vector>

#include "abnn/tensor.hpp"

namespace abnn {

// Counter-based generator: every draw is a pure function of
// (seed, epoch, batch, slot, counter), so results do not depend on
// evaluation order and never alias across purposes.

namespace rng_detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix2(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (splitmix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

} // namespace rng_detail

/// Identifies one independent random stream.
struct StreamKey {
    std::uint64_t seed = 0;
    std::uint64_t epoch = 0;
    std::uint64_t batch = 0;
    std::uint64_t slot = 0;

    std::uint64_t state() const {
        using rng_detail::mix2;
        return mix2(mix2(mix2(seed, epoch), batch), slot);
    }

    StreamKey with_slot(std::uint64_t s) const { return {seed, epoch, batch, s}; }
};

/// Slot-space partitions. A slot is (purpose << 40) | index, so streams
/// for different purposes can never collide.
namespace slot {
inline constexpr std::uint64_t make(std::uint64_t purpose, std::uint64_t index) {
    return (purpose << 40) | index;
}
inline constexpr std::uint64_t init_mu = 1;
inline constexpr std::uint64_t init_weight = 2;
inline constexpr std::uint64_t train_eps = 3;
inline constexpr std::uint64_t attack_eps = 4;
inline constexpr std::uint64_t attack_start = 5;
inline constexpr std::uint64_t shuffle = 6;
inline constexpr std::uint64_t predict_eps = 7;
inline constexpr std::uint64_t data_synth = 8;
inline constexpr std::uint64_t test_misc = 9;
} // namespace slot

inline std::uint64_t stream_word(std::uint64_t state, std::uint64_t counter) {
    return rng_detail::mix2(state, counter);
}

/// Uniform double in (0, 1].
inline double stream_unit(std::uint64_t state, std::uint64_t counter) {
    return static_cast<double>((stream_word(state, counter) >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal via Box-Muller; element i of a stream is a pure
/// function of the key and i.
inline double stream_normal(std::uint64_t state, std::uint64_t i) {
    const double u1 = stream_unit(state, 2 * i);
    const double u2 = stream_unit(state, 2 * i + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename T>
inline Tensor<T> rng_normal(const StreamKey& key, Shape shape) {
    const std::uint64_t st = key.state();
    Tensor<T> t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i)
        t.data[i] = static_cast<T>(stream_normal(st, i));
    return t;
}

template <typename T>
inline Tensor<T> rng_uniform(const StreamKey& key, Shape shape, T lo, T hi) {
    const std::uint64_t st = key.state();
    Tensor<T> t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i)
        t.data[i] = lo + static_cast<T>(stream_unit(st, i)) * (hi - lo);
    return t;
}

/// Deterministic Fisher-Yates permutation of [0, n).
inline std::vector<std::size_t> rng_permutation(const StreamKey& key, std::size_t n) {
    const std::uint64_t st = key.state();
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = stream_word(st, i) % i;
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

} // namespace abnn
