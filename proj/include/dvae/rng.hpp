#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace dvae {

/// xoshiro256** seeded through splitmix64.
///
/// Named substreams ("init", "eps", "corrupt", "binarize", "minibatch", ...)
/// are derived from the root seed and the name only, so the stream a
/// component sees does not depend on how much any other component consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Standard normal (Box-Muller, second value cached).
  double normal() noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }
  /// Uniform integer in [0, n), unbiased. n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n) noexcept;

  void fill_normal(std::span<double> out) noexcept {
    for (double& v : out) v = normal();
  }

  Rng substream(std::string_view name, std::uint64_t index = 0) const noexcept;

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Fisher-Yates with Rng::uniform_int; identical across platforms.
template <typename T>
void shuffle(std::span<T> v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace dvae
