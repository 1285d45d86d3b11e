#pragma once

#include <cstddef>
#include <string_view>

namespace dvae {

enum class Objective { vae, dvae, iwae, diwae };

std::string_view to_string(Objective o) noexcept;
Objective parse_objective(std::string_view s);

/// Which Monte Carlo objective to estimate, and with how many samples.
/// M corrupted copies per datum, K latent draws per copy.
struct EstimatorConfig {
  Objective objective = Objective::dvae;
  std::size_t M = 1;
  std::size_t K = 1;
  bool analytic_kl = false;  ///< vae only

  /// Importance-weighted objectives combine the M*K ratios with log-mean-exp.
  bool importance_weighted() const noexcept {
    return objective == Objective::iwae || objective == Objective::diwae;
  }
  /// vae and iwae never see corrupted inputs.
  bool uses_corruption() const noexcept {
    return objective == Objective::dvae || objective == Objective::diwae;
  }
  void validate() const;
};

}  // namespace dvae
