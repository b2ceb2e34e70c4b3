#pragma once

#include <cstdint>
#include <random>

namespace gridest {

/// splitmix64 finalizer; good enough to decorrelate derived stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic sub-stream seed from (master, stream, index). Parallel
/// trials each derive their own generator so aggregation order alone fixes
/// the output.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index = 0) {
    return splitmix64(splitmix64(master ^ 0x6a09e667f3bcc909ULL) ^ splitmix64(stream) ^
                      splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

/// Seeded random stream. Reproducible for a fixed seed within one build.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double gaussian() { return normal_(eng_); }

    /// Standard normal conditioned on |g| <= max_abs (rejection sampling,
    /// so the bound holds strictly rather than piling mass on it).
    double gaussian_truncated(double max_abs) {
        for (;;) {
            const double g = normal_(eng_);
            if (g >= -max_abs && g <= max_abs) return g;
        }
    }

    /// Uniform on [0, 1).
    double uniform() { return unit_(eng_); }

    /// Uniform on [0, hi].
    double uniform_in(double hi) { return hi * unit_(eng_); }

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(eng_() % static_cast<std::uint64_t>(n));
    }

  private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

}  // namespace gridest
