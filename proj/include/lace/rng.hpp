#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace lace {

/// Deterministic seedable generator: xoshiro256++ seeded through splitmix64.
/// Identical seed gives an identical stream, always. child(i) derives the
/// i-th trial generator by long-jumping the seed state i+1 times; each jump
/// skips 2^192 draws, so parent and children operate on provably disjoint
/// windows of the underlying sequence. Derive children from one level only
/// (a child of a child may collide with a sibling).
///
/// Single-owner mutable state: never share one Rng across threads; hand each
/// worker its own child.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) {
    if (!(lo < hi)) {
      throw std::invalid_argument("Rng::uniform: requires lo < hi, got [" +
                                  std::to_string(lo) + ", " + std::to_string(hi) + ")");
    }
    return lo + next_unit() * (hi - lo);
  }

  /// Gaussian sample via Box-Muller (second value cached, so draws come in
  /// deterministic pairs).
  double normal(double mean, double stddev) {
    if (!(stddev > 0.0)) {
      throw std::invalid_argument("Rng::normal: stddev must be > 0, got " +
                                  std::to_string(stddev));
    }
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    const double u1 = 1.0 - next_unit();  // (0, 1], keeps log finite
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return mean + stddev * radius * std::cos(angle);
  }

  /// Integer in [0, n) by the multiply-shift reduction.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Generator for trial `index`, derived from this generator's seed.
  Rng child(std::uint64_t index) const {
    Rng c(seed_);
    for (std::uint64_t i = 0; i <= index; ++i) c.long_jump();
    return c;
  }

  /// Seeded Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Advance 2^192 steps (xoshiro256++ LONG_JUMP polynomial).
  void long_jump() {
    static constexpr std::array<std::uint64_t, 4> kLongJump = {
        0x76e15d3efefdcbbfULL, 0xc5004e441c522fb3ULL, 0x77710069854ee241ULL,
        0x39109bb02acbe635ULL};
    std::array<std::uint64_t, 4> acc = {0, 0, 0, 0};
    for (std::uint64_t word : kLongJump) {
      for (int bit = 0; bit < 64; ++bit) {
        if (word & (1ULL << bit)) {
          for (std::size_t i = 0; i < 4; ++i) acc[i] ^= state_[i];
        }
        next_u64();
      }
    }
    state_ = acc;
    has_spare_ = false;
  }

  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lace
