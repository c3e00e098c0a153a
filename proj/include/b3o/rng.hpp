#pragma once

#include <cstdint>

namespace b3o {

// Splittable counter-based generator in the SplittableRandom style: the state
// walks a Weyl sequence and every output is a strong 64-bit mix of it, so a
// stream is fully determined by (seed, stream-id). Substreams hash a child id
// into the stream id, which makes derivations like
//   RngStream(seed).substream(replicate).substream(iteration).substream(chain)
// reproducible regardless of how many draws the parent has consumed.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), state_(hash2(hash2(0x8e51'ecdf'1a5f'523dULL, seed), stream)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    //! Independent child stream; identity-derived, so repeated calls with the
    //! same id return identical streams.
    RngStream substream(std::uint64_t id) const { return RngStream(seed_, hash2(stream_, id)); }

    std::uint64_t next_u64() {
        state_ += kGolden;
        return mix(state_);
    }

    //! Uniform draw in [0, 1), 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    //! Uniform draw in [lo, hi).
    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

private:
    static constexpr std::uint64_t kGolden = 0x9e37'79b9'7f4a'7c15ULL;

    // Stafford mix13 finalizer.
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58'476d'1ce4'e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d0'49bb'1331'11ebULL;
        z ^= z >> 31;
        return z;
    }

    static std::uint64_t hash2(std::uint64_t a, std::uint64_t b) {
        return mix(mix(a + kGolden) ^ (b + 0x5851'f42d'4c95'7f2dULL));
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t state_;
};

}  // namespace b3o
