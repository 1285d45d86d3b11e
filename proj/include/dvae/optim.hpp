#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dvae/model.hpp"

namespace dvae {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam, minimizing. Moment buffers are shaped on the first
/// step and must keep that shape afterwards.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const noexcept { return cfg_; }
  std::uint64_t step_count() const noexcept { return t_; }
  const std::vector<std::vector<double>>& first_moment() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moment() const noexcept { return v_; }

  /// One update of `params` against `grads` (tensor lists of equal shapes).
  /// Throws NumericError on a non-finite gradient, leaving params untouched.
  void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads);

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

void adam_step(AdamState& state, Params& params, const Params& grads);

struct LrTrial {
  double lr;
  double val_neg_bound;
};

/// Learning rate with the lowest validation negative bound; ties go to the
/// smaller rate. Non-finite metrics (diverged runs) never win.
double select_lr(std::span<const LrTrial> trials);

inline const std::vector<double> kDefaultLrGrid{1e-3, 3e-4, 1e-4};

}  // namespace dvae
