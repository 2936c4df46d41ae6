#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace borrowsim {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Counter-based stream keyed by a 64-bit seed and addressed by
/// (stream, substream). Streams never overlap, so replicate r of a scenario
/// draws the same numbers regardless of which thread runs it or in what order.
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint32_t substream = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform();

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> block_{};
    unsigned used_ = 4;
};

/// SplitMix64 finalizer; a bijective mixer of 64-bit values.
std::uint64_t mix64(std::uint64_t x);
/// Derives a child seed from a parent seed and a label (FNV-1a, then mixed).
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);

}  // namespace borrowsim
