#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace dmlme {

/// Counter-based 64-bit generator (splitmix64). The state advances by a
/// fixed odd increment and each output is a bijective mix of the counter,
/// so streams seeded differently never share internal structure.
///
/// Child streams are derived from the *construction* seed, never from the
/// current draw position: child(i) has seed mix64(seed + (i+1)*increment),
/// i.e. the i-th output of a splitmix64 stream over the parent seed. This
/// is the split rule every parallel task in the library uses; results are
/// therefore independent of scheduling.
///
/// The exact bit-streams are an internal contract (determinism per seed),
/// not a public one.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        state_ += kIncrement;
        return mix64(state_);
    }

    /// Derived generator for parallel task `stream`; pure in (seed, stream).
    Rng child(std::uint64_t stream) const {
        return Rng(mix64(seed_ + (stream + 1) * kIncrement));
    }

    /// Uniform on the open interval (0, 1); never returns 0 or 1.
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n), unbiased via rejection sampling. n >= 1.
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n; // 2^64 mod n
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller; the spare deviate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * kPi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    static constexpr std::uint64_t kIncrement = 0x9E3779B97F4A7C15ull;
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t mix64(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t seed_;
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace dmlme
