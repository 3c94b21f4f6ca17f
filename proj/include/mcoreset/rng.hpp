#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace mcoreset {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// xoshiro256++ with splitmix64 seeding. Named sub-streams are derived from
// the origin id, not the evolving state, so stream("a") yields the same
// generator no matter how many draws happened in between.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : origin_(seed) {
    std::uint64_t x = seed;
    for (auto& w : state_) w = detail::splitmix64(x);
  }

  Rng stream(std::uint64_t id) const {
    std::uint64_t mixed = origin_ ^ (0x9e3779b97f4a7c15ULL + id * 0xd1342543de82ef95ULL);
    std::uint64_t x = mixed;
    return Rng(detail::splitmix64(x));
  }

  Rng stream(std::string_view name) const { return stream(detail::fnv1a64(name)); }

  Rng stream(std::string_view name, std::uint64_t id) const {
    return stream(detail::fnv1a64(name) ^ (id * 0x2545f4914f6cdd1dULL + 0x9e3779b97f4a7c15ULL));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller without a cached spare; keeps the state a plain 4-word tuple.
  double normal() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t bound = n * (UINT64_MAX / n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= bound);
    return x % n;
  }

  std::uint64_t origin() const { return origin_; }

  std::array<std::uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { state_ = s; }

 private:
  std::uint64_t origin_;
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace mcoreset
