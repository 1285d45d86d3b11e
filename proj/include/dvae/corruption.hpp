#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dvae/matrix.hpp"
#include "dvae/rng.hpp"

namespace dvae {

enum class Modality { binary, real };

enum class CorruptionKind { none, salt_pepper, gaussian, mean_image };

std::string_view to_string(CorruptionKind k) noexcept;
CorruptionKind parse_corruption_kind(std::string_view s);

/// The corruption distribution p(x_tilde | x).
///
/// salt_pepper: each pixel, with probability `level`, is replaced by a fair
///   coin flip; otherwise kept.
/// mean_image: as salt_pepper with a per-pixel rate `rates[d]`.
/// gaussian: x_tilde = x + level * N(0, I), unclipped.
struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::none;
  double level = 0.0;
  std::vector<double> rates;

  static CorruptionSpec none() { return {}; }
  static CorruptionSpec salt_pepper(double rate) { return {CorruptionKind::salt_pepper, rate, {}}; }
  static CorruptionSpec gaussian(double sigma) { return {CorruptionKind::gaussian, sigma, {}}; }
  static CorruptionSpec mean_image(std::vector<double> r) {
    return {CorruptionKind::mean_image, 0.0, std::move(r)};
  }

  bool is_discrete() const noexcept {
    return kind == CorruptionKind::salt_pepper || kind == CorruptionKind::mean_image;
  }
  /// Replacement rate of pixel d for the discrete kinds.
  double rate(std::size_t d) const noexcept {
    return kind == CorruptionKind::mean_image ? rates[d] : level;
  }

  /// Range checks; throws ConfigError.
  void validate() const;
  /// Also rejects kinds that do not fit the data modality
  /// (coin-flip kinds on real data, gaussian on binary data).
  void validate_for(Modality modality) const;
};

/// Writes one corrupted copy of x into out (same length). Coin-flip kinds
/// consume exactly one uniform per pixel, gaussian one normal per pixel,
/// none consumes nothing.
void corrupt_into(const CorruptionSpec& spec, std::span<const double> x, std::span<double> out, Rng& rng);
std::vector<double> corrupt(const CorruptionSpec& spec, std::span<const double> x, Rng& rng);

/// Exact p(x_tilde | x) for the coin-flip kinds, D <= 20.
double corruption_pmf(const CorruptionSpec& spec, std::span<const double> x_tilde, std::span<const double> x);

struct CorruptionOutcome {
  std::vector<double> x_tilde;
  double prob;
};

/// Every x_tilde with nonzero probability under the coin-flip kinds, with its
/// probability. At most 2^D entries, D <= 20.
std::vector<CorruptionOutcome> enumerate_corruptions(const CorruptionSpec& spec, std::span<const double> x);

/// Per-pixel mean of a binary dataset, used as mean_image rates.
std::vector<double> mean_image_rates(const Matrix& dataset);

}  // namespace dvae
