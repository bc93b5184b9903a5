#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace astprep {

__extension__ typedef unsigned __int128 uint128_t;

/// 64-bit finalizer from SplitMix64.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Counter-based generator: the i-th output is a pure function of (key, i),
/// so streams keyed by (seed, file, chunk) do not depend on scheduling.
/// Distribution helpers are implemented here rather than via <random> so
/// results are identical across standard libraries.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit constexpr Rng(std::uint64_t key) noexcept : key_(key) {}

    static constexpr Rng keyed(std::uint64_t seed, std::uint64_t file_id, std::uint64_t chunk_index) noexcept {
        return Rng(mix64(mix64(mix64(seed) ^ file_id) ^ chunk_index));
    }

    /// Independent child stream.
    constexpr Rng split(std::uint64_t stream) const noexcept { return Rng(mix64(key_ ^ mix64(stream + 1))); }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept { return mix64(key_ + 0x9E3779B97F4A7C15ull * ++counter_); }

    /// Uniform on [0, bound) by Lemire's multiply-and-reject method; bound > 0.
    std::uint64_t below(std::uint64_t bound) noexcept {
        uint128_t m = static_cast<uint128_t>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<uint128_t>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform on the inclusive range [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    /// Uniform on (0, 1).
    double uniform01() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    constexpr std::uint64_t key() const noexcept { return key_; }
    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace astprep
