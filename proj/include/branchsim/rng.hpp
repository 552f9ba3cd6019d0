#ifndef BRANCHSIM_RNG_HPP
#define BRANCHSIM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace branchsim {

/// SplitMix64 step; used for seeding and for folding stream paths into seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Folds one path component into a seed. Chaining folds gives the
/// hierarchical stream derivation (master seed -> command -> cell -> replica)
/// used everywhere for reproducible parallel sampling: streams with different
/// paths are statistically independent, and a (seed, path) pair always yields
/// the same stream on any platform.
inline std::uint64_t fold_seed(std::uint64_t seed, std::uint64_t component) {
  std::uint64_t s = component + 0x632BE59BD9B4E019ull;
  std::uint64_t mixed = splitmix64(s);
  std::uint64_t t = seed ^ mixed;
  return splitmix64(t);
}

/// xoshiro256++ with SplitMix64 seeding.  Small, fast, and easy to make
/// deterministic across replicas; the standard <random> engines are avoided
/// in the hot paths on purpose.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  static RngStream from_path(std::uint64_t master,
                             std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = master;
    for (std::uint64_t c : path) s = fold_seed(s, c);
    return RngStream(s);
  }

  /// Derived substream, independent of how much this stream has been used.
  RngStream child(std::uint64_t index) const {
    return RngStream(fold_seed(seed_, index));
  }

  std::uint64_t derivation_seed() const { return seed_; }

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

  /// Uniform on [0,1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0,1]; safe to feed to log() or pow(., 1/alpha).
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) {
    // Lemire-style rejection-free bound is overkill here; modulo bias is
    // negligible for the n (particle counts) this is used with, but keep it
    // exact anyway via rejection.
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  std::uint64_t seed_;
};

}  // namespace branchsim

#endif  // BRANCHSIM_RNG_HPP
