#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dvae::math {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;
/// Bernoulli probabilities are clamped to [kProbClamp, 1 - kProbClamp] before log.
inline constexpr double kProbClamp = 1e-7;

/// log(sum(exp(v))), max-shifted. Throws dvae::Error("empty vector") on empty input.
double logsumexp(std::span<const double> v);
/// logsumexp(v) - log(v.size()).
double log_mean_exp(std::span<const double> v);

/// log(1 + e^x) without overflow.
double softplus(double x) noexcept;
double sigmoid(double x) noexcept;

double clamp_prob(double p) noexcept;

/// sum_d x_d log p_d + (1 - x_d) log(1 - p_d), with p clamped.
double bernoulli_loglik(std::span<const double> x, std::span<const double> p);

/// Diagonal Gaussian log density.
double gaussian_loglik(std::span<const double> x, std::span<const double> mu,
                       std::span<const double> logvar);

/// log N(z; 0, I).
double std_normal_logpdf(std::span<const double> z) noexcept;

/// KL(N(mu, diag(exp(logvar))) || N(0, I)).
double kl_diag_gauss_std(std::span<const double> mu, std::span<const double> logvar);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Hermite rule for the standard normal weight:
///   integral f(z) N(z; 0, 1) dz ~= sum_i w_i f(z_i),  1 <= n <= 64.
QuadratureRule gauss_hermite_nodes(int n);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation (n - 1 denominator); 0 when n < 2
};
MeanStd mean_std(std::span<const double> v);

}  // namespace dvae::math
