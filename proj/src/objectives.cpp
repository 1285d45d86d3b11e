#include "dvae/objectives.hpp"

#include <cmath>

#include "dvae/error.hpp"
#include "dvae/math.hpp"

namespace dvae {

std::string_view to_string(Objective o) noexcept {
  switch (o) {
    case Objective::vae: return "vae";
    case Objective::dvae: return "dvae";
    case Objective::iwae: return "iwae";
    case Objective::diwae: return "diwae";
  }
  return "vae";
}

Objective parse_objective(std::string_view s) {
  if (s == "vae") return Objective::vae;
  if (s == "dvae") return Objective::dvae;
  if (s == "iwae") return Objective::iwae;
  if (s == "diwae") return Objective::diwae;
  throw ConfigError("objective", "unknown objective '" + std::string(s) + "'");
}

void EstimatorConfig::validate() const {
  if (M < 1) throw ConfigError("samples.M", "must be >= 1");
  if (K < 1) throw ConfigError("samples.K", "must be >= 1");
  if (analytic_kl && objective != Objective::vae) throw ConfigError("analytic_kl", "only valid for objective vae");
}

namespace {

constexpr std::size_t kMaxCvaeDim = 12;
constexpr int kBootstrapResamples = 100;

Matrix single_row(std::span<const double> x) { return Matrix(1, x.size(), std::vector<double>(x.begin(), x.end())); }

BoundEstimate mean_estimate(std::span<const double> lw) {
  const auto ms = math::mean_std(lw);
  return {ms.mean, ms.std / std::sqrt(static_cast<double>(lw.size())), lw.size()};
}

}  // namespace

Draws sample_draws(const Matrix& x, const CorruptionSpec& corruption, const EstimatorConfig& est,
                   std::size_t latent_dim, Rng& corrupt_rng, Rng& eps_rng) {
  est.validate();
  Draws d;
  d.M = est.M;
  d.K = est.K;
  d.x_tilde.resize(x.rows() * est.M, x.cols());
  const CorruptionSpec none;
  const CorruptionSpec& spec = est.uses_corruption() ? corruption : none;
  for (std::size_t b = 0; b < x.rows(); ++b)
    for (std::size_t m = 0; m < est.M; ++m) corrupt_into(spec, x.row(b), d.x_tilde.row(b * est.M + m), corrupt_rng);
  d.eps.resize(x.rows() * est.M * est.K, latent_dim);
  eps_rng.fill_normal(d.eps.flat());
  return d;
}

double elbo_vae(const Params& params, std::span<const double> x, const Matrix& eps, bool analytic_kl) {
  Draws d;
  d.M = 1;
  d.K = eps.rows();
  d.x_tilde = single_row(x);
  d.eps = eps;
  EstimatorConfig est{Objective::vae, 1, eps.rows(), analytic_kl};
  return evaluate_objective(params, d.x_tilde, d, est).per_example[0];
}

BoundEstimate dvae_estimate(const Params& params, std::span<const double> x, const CorruptionSpec& corruption,
                            std::size_t M, std::size_t K, Rng& rng) {
  const EstimatorConfig est{Objective::dvae, M, K, false};
  const Matrix xm = single_row(x);
  const Draws d = sample_draws(xm, corruption, est, params.arch().latent_dim, rng);
  const auto v = evaluate_objective(params, xm, d, est);
  return mean_estimate(v.log_weights.row(0));
}

BoundEstimate diwae_estimate(const Params& params, std::span<const double> x, const CorruptionSpec& corruption,
                             std::size_t M, std::size_t K, Rng& rng) {
  const EstimatorConfig est{Objective::diwae, M, K, false};
  const Matrix xm = single_row(x);
  const Draws d = sample_draws(xm, corruption, est, params.arch().latent_dim, rng);
  const auto v = evaluate_objective(params, xm, d, est);
  auto lw = v.log_weights.row(0);
  BoundEstimate out{v.per_example[0], 0.0, lw.size()};
  if (lw.size() > 1) {
    Rng boot(rng.next_u64());
    std::vector<double> resample(lw.size()), stats(kBootstrapResamples);
    for (auto& s : stats) {
      for (auto& r : resample) r = lw[boot.uniform_int(lw.size())];
      s = math::log_mean_exp(resample);
    }
    out.std_error = math::mean_std(stats).std;
  }
  return out;
}

std::vector<double> log_joint(const Params& params, std::span<const double> x, const Matrix& z) {
  const DecoderOutput out = decode(params, z);
  Matrix targets(z.rows(), x.size());
  for (std::size_t r = 0; r < z.rows(); ++r) std::copy(x.begin(), x.end(), targets.row(r).begin());
  auto ll = output_loglik(params.arch().output, out, targets);
  for (std::size_t r = 0; r < z.rows(); ++r) ll[r] += math::std_normal_logpdf(z.row(r));
  return ll;
}

std::vector<double> log_marginal_q(const Params& params, std::span<const double> x, const CorruptionSpec& corruption,
                                   const Matrix& z) {
  std::vector<CorruptionOutcome> outcomes;
  if (corruption.kind == CorruptionKind::none) {
    outcomes.push_back({std::vector<double>(x.begin(), x.end()), 1.0});
  } else {
    if (x.size() > kMaxCvaeDim) throw UnsupportedError("log_marginal_q: input dimension too large to enumerate");
    outcomes = enumerate_corruptions(corruption, x);
  }
  Matrix xt(outcomes.size(), x.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i)
    std::copy(outcomes[i].x_tilde.begin(), outcomes[i].x_tilde.end(), xt.row(i).begin());
  const GaussianParams q = encode(params, xt);

  std::vector<double> out(z.rows()), terms(outcomes.size());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    for (std::size_t i = 0; i < outcomes.size(); ++i)
      terms[i] = std::log(outcomes[i].prob) + math::gaussian_loglik(z.row(r), q.mu.row(i), q.logvar.row(i));
    out[r] = math::logsumexp(terms);
  }
  return out;
}

BoundEstimate cvae_estimate(const Params& params, std::span<const double> x, const CorruptionSpec& corruption,
                            std::size_t n_outer, std::size_t K, Rng& rng) {
  if (corruption.kind != CorruptionKind::none) {
    if (!corruption.is_discrete()) throw UnsupportedError("cvae_estimate: corruption must be enumerable");
    if (x.size() > kMaxCvaeDim) throw UnsupportedError("cvae_estimate: input dimension too large to enumerate");
  }
  if (n_outer == 0 || K == 0) throw ConfigError("samples", "cvae_estimate needs n_outer, K >= 1");
  const EstimatorConfig est{Objective::dvae, n_outer, K, false};
  const Matrix xm = single_row(x);
  const Draws d = sample_draws(xm, corruption, est, params.arch().latent_dim, rng);
  const GaussianParams q = encode(params, d.x_tilde);
  Matrix z(n_outer * K, params.arch().latent_dim);
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t j = 0; j < z.cols(); ++j)
      z(r, j) = q.mu(r / K, j) + std::exp(0.5 * q.logvar(r / K, j)) * d.eps(r, j);
  const auto lj = log_joint(params, x, z);
  const auto lq = log_marginal_q(params, x, corruption, z);
  std::vector<double> terms(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    terms[r] = lj[r] - lq[r];
    if (!std::isfinite(terms[r])) throw NumericError("cvae_estimate: non-finite log ratio");
  }
  return mean_estimate(terms);
}

}  // namespace dvae
