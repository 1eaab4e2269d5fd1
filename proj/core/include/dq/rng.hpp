#pragma once

#include <cstdint>
#include <random>

namespace dq {

/// SplitMix64 finalizer; used to derive independent substream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Per-path random substream keyed by (seed, index). Every path is a pure
/// function of its key, so ensembles are reproducible independent of worker
/// count or scheduling. Gaussians come from an explicit Box-Muller transform
/// on mt19937_64 output, which keeps the stream identical across platforms
/// (std::normal_distribution is implementation-defined).
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t index)
        : eng_(mix64(mix64(seed) ^ mix64(index + 0x51a9b96e1c3d0f2bULL))) {}

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace dq
