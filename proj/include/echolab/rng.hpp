#pragma once

#include <cmath>
#include <cstdint>

namespace echolab {

/// SplitMix64: seedable, splittable, counter-based generator.
/// State advances by the golden-gamma increment; each output is a finalizer
/// of the state, so draw i from stream s is a pure function of (s, i).
/// Independent streams are derived by mixing a stream id into the seed,
/// never by sequential draws, so parallel and serial runs agree.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    /// Derive an independent child stream (e.g. one per Monte-Carlo trial).
    static SplitMix64 stream(std::uint64_t seed, std::uint64_t stream_id) {
        return SplitMix64(mix(seed + 0x9E3779B97F4A7C15ULL * (stream_id + 1)));
    }

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Uniform in (0, 1].
    double uniform() {
        return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// One Gaussian per two uniforms (basic Box-Muller, cosine branch).
    /// No draw caching, so the stream position is a fixed function of the
    /// number of gaussians requested.
    double gaussian(double mean, double sd) {
        const double u1 = uniform();
        const double u2 = uniform();
        return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

} // namespace echolab
