#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace evsel {

/// Seeded generator whose outputs are identical on every platform:
/// std::mt19937_64 is fully specified, and the bounded draw and shuffle
/// here avoid the implementation-defined standard distributions.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// `count` distinct indices from [0, n), returned ascending.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed);

}  // namespace evsel
