// Counter-based random number generation: every draw is a pure hash of
// (seed, stream, counter), so paths are reproducible under any execution
// order and any thread count.
#pragma once

#include <cmath>
#include <cstdint>

namespace conehjb {

namespace detail {
// splitmix64 finalizer; full avalanche on 64 bits.
inline std::uint64_t mix64(std::uint64_t a) {
    a += 0x9e3779b97f4a7c15ull;
    a = (a ^ (a >> 30)) * 0xbf58476d1ce4e5b9ull;
    a = (a ^ (a >> 27)) * 0x94d049bb133111ebull;
    return a ^ (a >> 31);
}
}  // namespace detail

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t raw(std::uint64_t stream, std::uint64_t counter) const {
        std::uint64_t h = detail::mix64(seed_ ^ 0x243f6a8885a308d3ull);
        h = detail::mix64(h ^ stream);
        h = detail::mix64(h ^ counter);
        return h;
    }

    // Uniform in (0, 1); never returns 0 so logs are safe.
    double uniform(std::uint64_t stream, std::uint64_t counter) const {
        return (static_cast<double>(raw(stream, counter) >> 11) + 0.5) *
               (1.0 / 9007199254740992.0);
    }

    // Standard normal via Box-Muller on two independent uniforms.
    double normal(std::uint64_t stream, std::uint64_t counter) const {
        double u1 = uniform(stream, 2 * counter);
        double u2 = uniform(stream, 2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Exponential with unit rate.
    double exponential(std::uint64_t stream, std::uint64_t counter) const {
        return -std::log(uniform(stream, counter));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
};

// Stream labels keep the draw families of one path disjoint.
inline std::uint64_t stream_id(std::uint64_t path_index, std::uint64_t purpose) {
    return detail::mix64(path_index * 0x9e3779b97f4a7c15ull + purpose);
}

inline constexpr std::uint64_t kStreamDiffusion = 1;
inline constexpr std::uint64_t kStreamJumpBase = 1000;

}  // namespace conehjb
