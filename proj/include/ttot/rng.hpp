#pragma once

#include <cmath>
#include <cstdint>

namespace ttot {

/// Counter-based pseudorandom generator (splitmix64 stream).
///
/// Deterministic and portable across platforms: the k-th draw depends only on
/// (seed, k), so fixtures and Monte-Carlo sub-streams are reproducible.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : key_(mix(seed ^ 0x9e3779b97f4a7c15ULL)) {}

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

    /// Uniform draw in the open interval (0, 1).
    double next_uniform() {
        // 53-bit mantissa; offset by half an ulp so 0 is never returned
        // (Box-Muller takes a log of this value).
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal draw via Box-Muller.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_{0};
    double spare_{0.0};
    bool have_spare_{false};
};

/// Deterministic sub-seed for stream `index` of a run seeded with `seed`.
/// Trials and grid cells draw from independent sub-streams regardless of
/// execution order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return CounterRng::mix(CounterRng::mix(seed) ^ (index + 1) * 0xd1342543de82ef95ULL);
}

} // namespace ttot
