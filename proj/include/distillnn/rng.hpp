#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace distillnn {

/// Seeded random stream. Distributions are computed from raw engine output
/// so identical seeds give identical values on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  /// Number of raw 64-bit draws consumed so far.
  std::uint64_t draws() const noexcept { return draws_; }

  std::uint64_t next_u64() {
    ++draws_;
    return engine_();
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one value per two uniforms, no caching).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  /// Independent stream derived from this stream's seed and a name.
  Rng split(std::string_view name) const { return Rng(derive_seed(seed_, name)); }
  Rng split(std::uint64_t index) const { return Rng(derive_seed(seed_, index)); }

  static std::uint64_t derive_seed(std::uint64_t root, std::string_view name);
  static std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

 private:
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
};

/// In-place Fisher-Yates shuffle driven by an Rng.
template <typename Container>
void shuffle(Container& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = rng.index(i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace distillnn
