#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace clusterprobe {

// Seedable generator with a fixed, portable output sequence.
//
// The engine is std::mt19937_64, whose output is pinned by the C++ standard.
// Seeds are expanded with SplitMix64 so that (seed, stream) pairs give
// unrelated sequences. All derived distributions are implemented here rather
// than through <random> distributions, which are implementation-defined:
//   uniform()        53-bit mantissa in [0, 1)
//   uniform_index(n) rejection sampling, unbiased
//   normal()         Box-Muller, both outputs used
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t uniform_index(std::size_t n);
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace clusterprobe
