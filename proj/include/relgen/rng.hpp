#pragma once

#include <cstdint>
#include <string_view>

namespace relgen {

// Deterministic 64-bit linear congruential generator shared by every
// randomized stage (synthesis, random-colour highlighting, sampling), so
// results are bit-reproducible across platforms and reimplementations.
//
//   state <- state * 6364136223846793005 + 1442695040888963407   (mod 2^64)
//
// Bytes take the top 8 bits of the advanced state, doubles the top 53 bits
// scaled to [0, 1). Named sub-streams derive their initial state as
// seed XOR fnv1a64(stream name), so one run seed drives independent
// generators and varying one config axis never perturbs another stream.
class Lcg64 {
public:
    static constexpr uint64_t kMul = 6364136223846793005ULL;
    static constexpr uint64_t kInc = 1442695040888963407ULL;

    explicit Lcg64(uint64_t seed) : state_(seed) {}
    Lcg64(uint64_t seed, std::string_view stream) : state_(seed ^ fnv1a64(stream)) {}

    uint64_t next_u64() {
        state_ = state_ * kMul + kInc;
        return state_;
    }

    uint8_t next_byte() { return static_cast<uint8_t>(next_u64() >> 56); }

    // Uniform in [0, 1) with 53 bits of resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [0, n) via multiply-high on the top 32 bits; n > 0.
    uint32_t next_below(uint32_t n) {
        uint64_t hi = next_u64() >> 32;
        return static_cast<uint32_t>((hi * n) >> 32);
    }

    static constexpr uint64_t fnv1a64(std::string_view s) {
        uint64_t h = 14695981039346656037ULL;
        for (char c : s) {
            h ^= static_cast<uint8_t>(c);
            h *= 1099511628211ULL;
        }
        return h;
    }

private:
    uint64_t state_;
};

}  // namespace relgen
