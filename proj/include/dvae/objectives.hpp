#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dvae/corruption.hpp"
#include "dvae/estimator.hpp"
#include "dvae/model.hpp"
#include "dvae/rng.hpp"

namespace dvae {

/// Bound value in nats per example with its Monte Carlo standard error.
struct BoundEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_terms = 0;
};

/// Draws corrupted copies and reparameterization noise for a batch.
/// Corruption is skipped (x_tilde = x) for objectives that do not use it.
/// All corruption draws come from corrupt_rng, row by row, then all eps from
/// eps_rng.
Draws sample_draws(const Matrix& x, const CorruptionSpec& corruption, const EstimatorConfig& est,
                   std::size_t latent_dim, Rng& corrupt_rng, Rng& eps_rng);
inline Draws sample_draws(const Matrix& x, const CorruptionSpec& corruption, const EstimatorConfig& est,
                          std::size_t latent_dim, Rng& rng) {
  return sample_draws(x, corruption, est, latent_dim, rng, rng);
}

/// Standard VAE bound on fixed noise eps (K x latent_dim):
///   (1/K) sum_k log p(x | z_k) - KL(q(z|x) || p(z)),
/// with the KL in closed form when analytic_kl, else as the Monte Carlo
/// average of log q(z_k | x) - log p(z_k).
double elbo_vae(const Params& params, std::span<const double> x, const Matrix& eps, bool analytic_kl);

/// Denoising bound: average over M corruptions and K latents of
/// log p(x, z) - log q(z | x_tilde). std_error = sample std / sqrt(MK).
BoundEstimate dvae_estimate(const Params& params, std::span<const double> x, const CorruptionSpec& corruption,
                            std::size_t M, std::size_t K, Rng& rng);

/// Denoising importance-weighted bound: log-mean-exp of all M*K ratios.
/// std_error from 100 bootstrap resamples of the ratios.
BoundEstimate diwae_estimate(const Params& params, std::span<const double> x, const CorruptionSpec& corruption,
                             std::size_t M, std::size_t K, Rng& rng);

/// log q_tilde(z | x) = log sum_i p(x_tilde_i | x) q(z | x_tilde_i) by exhaustive
/// enumeration of the corruption outcomes, for each row of z.
std::vector<double> log_marginal_q(const Params& params, std::span<const double> x, const CorruptionSpec& corruption,
                                   const Matrix& z);

/// Bound under the marginalized encoder q_tilde: average of
/// log p(x, z) - log q_tilde(z | x) over n_outer corrupted copies x K latents,
/// z ~ q(z | x_tilde). Needs binary x with D <= 12 (or kind none).
BoundEstimate cvae_estimate(const Params& params, std::span<const double> x, const CorruptionSpec& corruption,
                            std::size_t n_outer, std::size_t K, Rng& rng);

/// log p(x | z) + log p(z) for each row of z.
std::vector<double> log_joint(const Params& params, std::span<const double> x, const Matrix& z);

}  // namespace dvae
