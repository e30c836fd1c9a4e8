#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

namespace hype {

// Seeded generator with hand-rolled distributions so that fixtures and
// synthetic corpora are identical across standard-library implementations
// (std:: distributions are not pinned by the standard, mt19937_64 is).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the partner value is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 6.283185307179586476925286766559 * u2;
        cached_ = radius * std::sin(angle);
        has_cached_ = true;
        return radius * std::cos(angle);
    }

    // [0, n)
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    template <typename It>
    void shuffle(It first, It last) {
        auto count = static_cast<std::size_t>(last - first);
        for (std::size_t i = count; i > 1; --i) {
            std::size_t j = index(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace hype
