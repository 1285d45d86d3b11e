#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dvae/corruption.hpp"
#include "dvae/model.hpp"
#include "dvae/rng.hpp"

namespace dvae::verify {

/// A model small enough that every quantity of interest can be computed
/// exactly: enumeration over corruption outcomes, tensor Gauss-Hermite
/// quadrature over z.
struct Testbed {
  Params params;
  std::vector<double> x;
  CorruptionSpec corruption;
  int order = 40;
  std::uint64_t seed = 0;
};

struct TestbedOptions {
  std::size_t input_dim = 6;
  std::size_t latent_dim = 1;
  std::size_t hidden = 4;
  OutputFamily output = OutputFamily::bernoulli;
  double level = 0.3;
  double weight_scale = 0.5;  ///< multiplies the Glorot init; keeps z-quadrature converged at n = 40
  double bias_scale = 0.5;    ///< std of the random biases
  int order = 40;
};

Testbed make_testbed(const TestbedOptions& opts, std::uint64_t seed);

/// Random testbed of the kind used by the suite: binary D_x in [2, max_dx],
/// D_z in {1, 2}, salt-and-pepper at `level`.
Testbed random_testbed(std::uint64_t seed, std::size_t max_dx = 6, double level = 0.3);

/// log of integral exp(log_f(z)) N(z; 0, I) dz over R^dz by an n-point tensor
/// Gauss-Hermite rule, accumulated in log space.
double log_integral_std_normal(std::size_t dz, int n, const std::function<double(std::span<const double>)>& log_f);

/// log p(x) at quadrature order n, no precision check.
double logpx_quadrature(const Params& params, std::span<const double> x, int n);

/// log p(x) at the testbed's order; throws PrecisionError when orders n and
/// n + 8 disagree by more than 1e-8.
double exact_logpx(const Testbed& tb);

/// Corruption outcomes with their log probabilities. Coin-flip kinds are
/// enumerated exactly; gaussian corruption uses a tensor Gauss-Hermite rule
/// of order n_x per pixel.
struct Outcomes {
  Matrix x_tilde;
  std::vector<double> log_prob;
};
Outcomes corruption_outcomes(const CorruptionSpec& spec, std::span<const double> x, int n_x = 12);

struct ExactBounds {
  double logpx = 0.0;
  double dvae = 0.0;
  double cvae = 0.0;
  double expected_kl = 0.0;  ///< E_{p(x~|x)} KL(q(z|x~) || p(z|x))
};

/// L_dvae and L_cvae by outcome enumeration and quadrature in z (order n);
/// the expected KL on an independent order n + 8 grid.
ExactBounds exact_bounds(const Testbed& tb, int n_x = 12);

/// Outcome of one check, written as one JSON object per line.
struct CheckReport {
  std::string name;
  bool pass = false;
  double slack = 0.0;  ///< worst margin; negative means violated
  double se = 0.0;
  std::uint64_t seed = 0;
  std::string detail;
};
std::string to_json_line(const CheckReport& r);

/// Gibbs' inequality  sum f log g <= sum f log f  on random discrete pairs.
CheckReport check_gibbs(Rng& rng, std::size_t trials);

struct MixtureResult {
  std::vector<double> grid;
  std::vector<double> exact;
  std::vector<double> mc;
  std::vector<double> mc_se;
  std::size_t within_3se = 0;
  double weight_sum = 0.0;
  double integral = 0.0;
};
/// Monte Carlo estimate of the marginal encoder density on a z grid against
/// its 2^D enumeration. Needs a 1-D latent and discrete corruption.
MixtureResult mixture_density(const Testbed& tb, std::size_t grid_points, std::size_t draws, Rng& rng);
CheckReport check_mixture(const Testbed& tb, std::size_t grid_points, std::size_t draws, Rng& rng);

/// Exact chain log p(x) >= L_dvae and L_dvae >= L_cvae, one report per link.
std::vector<CheckReport> check_sandwich(const Testbed& tb);

/// log p(x) = L_dvae + E KL, all three terms from separate quadratures.
CheckReport check_expected_kl(const Testbed& tb);

struct McSandwichCounts {
  std::size_t trials = 0;
  std::size_t upper_violations = 0;  ///< L_dvae estimate > log p(x) + 3 SE
  std::size_t lower_violations = 0;  ///< L_dvae estimate < L_cvae estimate - 3 combined SE
};
/// Seeded Monte Carlo trials on one testbed, `draws` terms per estimate.
McSandwichCounts mc_sandwich(const Testbed& tb, std::size_t trials, std::size_t draws, std::uint64_t seed);

struct SuiteOptions {
  std::uint64_t seed = 0;
  std::size_t testbeds = 100;
  std::size_t gibbs_trials = 1000;
  std::size_t mc_trials = 1000;
  std::size_t mc_draws = 1000;
  std::size_t mixture_draws = 100000;
};
std::vector<CheckReport> run_suite(const SuiteOptions& opts);

}  // namespace dvae::verify
