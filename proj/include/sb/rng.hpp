#pragma once

#include <cstdint>
#include <limits>

namespace sb {

// Counter-based generator: output k is a keyed 64-bit mix of k, so a stream
// is just (key, counter). Child streams derive their key from the parent key
// and an index, which makes trajectory i of a dataset independent of how
// many draws any other trajectory made.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static Rng stream(std::uint64_t master, std::uint64_t index) { return Rng(master).split(index); }

  Rng split(std::uint64_t index) const {
    Rng child;
    child.key_ = mix(key_ ^ mix(index + 0xbb67ae8584caa73bULL));
    return child;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform on {0, ..., bound-1}; bound > 0.
  std::uint64_t below(std::uint64_t bound);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace sb
