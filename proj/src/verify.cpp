#include "dvae/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <json.hpp>
#include <sstream>

#include "dvae/error.hpp"
#include "dvae/math.hpp"
#include "dvae/objectives.hpp"

namespace dvae::verify {

namespace {

constexpr double kQuadratureTol = 1e-8;
constexpr double kExpectedKlTol = 1e-6;
constexpr double kGibbsTol = 1e-12;

/// Tensor-product Gauss-Hermite rule over R^dz for the N(0, I) weight.
struct TensorRule {
  Matrix nodes;
  std::vector<double> log_weights;
};

TensorRule tensor_rule(std::size_t dz, int n) {
  const auto rule = math::gauss_hermite_nodes(n);
  std::size_t count = 1;
  for (std::size_t d = 0; d < dz; ++d) count *= static_cast<std::size_t>(n);
  TensorRule t{Matrix(count, dz), std::vector<double>(count, 0.0)};
  for (std::size_t p = 0; p < count; ++p) {
    std::size_t rem = p;
    for (std::size_t d = 0; d < dz; ++d) {
      const std::size_t i = rem % static_cast<std::size_t>(n);
      rem /= static_cast<std::size_t>(n);
      t.nodes(p, d) = rule.nodes[i];
      t.log_weights[p] += std::log(rule.weights[i]);
    }
  }
  return t;
}

std::vector<double> log_lik(const Params& params, std::span<const double> x, const Matrix& z) {
  const DecoderOutput out = decode(params, z);
  Matrix targets(z.rows(), x.size());
  for (std::size_t r = 0; r < z.rows(); ++r) std::copy(x.begin(), x.end(), targets.row(r).begin());
  return output_loglik(params.arch().output, out, targets);
}

/// Grid nodes moved onto every encoder Gaussian: row i*G + j holds
/// mu_i + sigma_i * t_j.
Matrix shifted_nodes(const GaussianParams& q, const TensorRule& rule) {
  const std::size_t G = rule.nodes.rows(), dz = rule.nodes.cols();
  Matrix z(q.mu.rows() * G, dz);
  for (std::size_t i = 0; i < q.mu.rows(); ++i)
    for (std::size_t j = 0; j < G; ++j)
      for (std::size_t d = 0; d < dz; ++d)
        z(i * G + j, d) = q.mu(i, d) + std::exp(0.5 * q.logvar(i, d)) * rule.nodes(j, d);
  return z;
}

double aggregate_min(double a, double b) { return std::isnan(b) ? a : std::min(a, b); }

}  // namespace

Testbed make_testbed(const TestbedOptions& opts, std::uint64_t seed) {
  Architecture arch;
  arch.input_dim = opts.input_dim;
  arch.latent_dim = opts.latent_dim;
  arch.encoder_hidden = {opts.hidden};
  arch.decoder_hidden = {opts.hidden};
  arch.activation = Activation::tanh;
  arch.output = opts.output;
  arch.validate();

  const Rng root(seed);
  Rng init = root.substream("init");
  Testbed tb;
  tb.seed = seed;
  tb.order = opts.order;
  tb.params = init_params(arch, init);
  Rng bias = root.substream("bias");
  for (auto& layer : tb.params.layers()) {
    for (auto& w : layer.weight.flat()) w *= opts.weight_scale;
    for (auto& b : layer.bias) b = opts.bias_scale * bias.normal();
  }
  Rng xr = root.substream("x");
  tb.x.resize(opts.input_dim);
  const bool binary = opts.output == OutputFamily::bernoulli;
  for (auto& v : tb.x) v = binary ? (xr.bernoulli(0.5) ? 1.0 : 0.0) : xr.uniform();
  if (opts.level > 0.0)
    tb.corruption = binary ? CorruptionSpec::salt_pepper(opts.level) : CorruptionSpec::gaussian(opts.level);
  return tb;
}

Testbed random_testbed(std::uint64_t seed, std::size_t max_dx, double level) {
  Rng r(seed);
  TestbedOptions opts;
  opts.input_dim = 2 + r.uniform_int(max_dx - 1);
  opts.latent_dim = 1 + r.uniform_int(2);
  opts.level = level;
  return make_testbed(opts, r.next_u64());
}

double log_integral_std_normal(std::size_t dz, int n, const std::function<double(std::span<const double>)>& log_f) {
  const TensorRule rule = tensor_rule(dz, n);
  std::vector<double> terms(rule.log_weights.size());
  for (std::size_t p = 0; p < terms.size(); ++p) terms[p] = rule.log_weights[p] + log_f(rule.nodes.row(p));
  return math::logsumexp(terms);
}

double logpx_quadrature(const Params& params, std::span<const double> x, int n) {
  const TensorRule rule = tensor_rule(params.arch().latent_dim, n);
  auto terms = log_lik(params, x, rule.nodes);
  for (std::size_t p = 0; p < terms.size(); ++p) terms[p] += rule.log_weights[p];
  return math::logsumexp(terms);
}

double exact_logpx(const Testbed& tb) {
  if (tb.params.arch().latent_dim > 2) throw UnsupportedError("exact_logpx: latent dimension must be 1 or 2");
  const double a = logpx_quadrature(tb.params, tb.x, tb.order);
  const double b = logpx_quadrature(tb.params, tb.x, tb.order + 8);
  if (!(std::abs(a - b) <= kQuadratureTol)) {
    std::ostringstream msg;
    msg << "exact_logpx: orders " << tb.order << " and " << tb.order + 8 << " differ by " << std::abs(a - b);
    throw PrecisionError(msg.str());
  }
  return a;
}

Outcomes corruption_outcomes(const CorruptionSpec& spec, std::span<const double> x, int n_x) {
  Outcomes o;
  if (spec.kind == CorruptionKind::none) {
    o.x_tilde = Matrix(1, x.size(), std::vector<double>(x.begin(), x.end()));
    o.log_prob = {0.0};
  } else if (spec.is_discrete()) {
    const auto all = enumerate_corruptions(spec, x);
    o.x_tilde.resize(all.size(), x.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      std::copy(all[i].x_tilde.begin(), all[i].x_tilde.end(), o.x_tilde.row(i).begin());
      o.log_prob.push_back(std::log(all[i].prob));
    }
  } else {
    const TensorRule rule = tensor_rule(x.size(), n_x);
    o.x_tilde.resize(rule.nodes.rows(), x.size());
    for (std::size_t i = 0; i < rule.nodes.rows(); ++i)
      for (std::size_t d = 0; d < x.size(); ++d) o.x_tilde(i, d) = x[d] + spec.level * rule.nodes(i, d);
    o.log_prob = rule.log_weights;
  }
  return o;
}

ExactBounds exact_bounds(const Testbed& tb, int n_x) {
  const Params& params = tb.params;
  const std::size_t dz = params.arch().latent_dim;
  ExactBounds out;
  out.logpx = exact_logpx(tb);

  const Outcomes oc = corruption_outcomes(tb.corruption, tb.x, n_x);
  const std::size_t N = oc.log_prob.size();
  const GaussianParams q = encode(params, oc.x_tilde);

  auto log_q = [&](std::size_t i, std::span<const double> z) {
    return math::gaussian_loglik(z, q.mu.row(i), q.logvar.row(i));
  };
  std::vector<double> mix(N);
  auto log_q_tilde = [&](std::span<const double> z) {
    for (std::size_t k = 0; k < N; ++k) mix[k] = oc.log_prob[k] + log_q(k, z);
    return math::logsumexp(mix);
  };

  // L_dvae and L_cvae share the order-n grid around each component.
  {
    const TensorRule rule = tensor_rule(dz, tb.order);
    const std::size_t G = rule.nodes.rows();
    const Matrix z = shifted_nodes(q, rule);
    const auto ll = log_lik(params, tb.x, z);
    for (std::size_t i = 0; i < N; ++i) {
      const double pi = std::exp(oc.log_prob[i]);
      double dv = 0.0, cv = 0.0;
      for (std::size_t j = 0; j < G; ++j) {
        const auto zr = z.row(i * G + j);
        const double lj = ll[i * G + j] + math::std_normal_logpdf(zr);
        const double w = std::exp(rule.log_weights[j]);
        dv += w * (lj - log_q(i, zr));
        cv += w * (lj - log_q_tilde(zr));
      }
      out.dvae += pi * dv;
      out.cvae += pi * cv;
    }
  }
  // Expected KL to the true posterior, on a different grid, with the
  // posterior density evaluated pointwise.
  {
    const TensorRule rule = tensor_rule(dz, tb.order + 8);
    const std::size_t G = rule.nodes.rows();
    const Matrix z = shifted_nodes(q, rule);
    const auto ll = log_lik(params, tb.x, z);
    for (std::size_t i = 0; i < N; ++i) {
      double kl = 0.0;
      for (std::size_t j = 0; j < G; ++j) {
        const auto zr = z.row(i * G + j);
        const double log_post = ll[i * G + j] + math::std_normal_logpdf(zr) - out.logpx;
        kl += std::exp(rule.log_weights[j]) * (log_q(i, zr) - log_post);
      }
      out.expected_kl += std::exp(oc.log_prob[i]) * kl;
    }
  }
  return out;
}

std::string to_json_line(const CheckReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["pass"] = r.pass;
  j["slack"] = r.slack;
  j["se"] = r.se;
  j["seed"] = r.seed;
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j.dump();
}

CheckReport check_gibbs(Rng& rng, std::size_t trials) {
  CheckReport rep{"gibbs", true, std::numeric_limits<double>::infinity(), 0.0, rng.seed(), {}};
  std::size_t violations = 0;
  auto random_pmf = [&](std::size_t n, bool sparse) {
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& v : p) {
      v = (sparse && rng.bernoulli(0.3)) ? 0.0 : -std::log(1.0 - rng.uniform());
      total += v;
    }
    if (total == 0.0) {
      p[rng.uniform_int(n)] = 1.0;
      total = 1.0;
    }
    for (auto& v : p) v /= total;
    return p;
  };
  auto cross = [](const std::vector<double>& f, const std::vector<double>& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i] == 0.0) continue;
      if (g[i] == 0.0) return -std::numeric_limits<double>::infinity();
      s += f[i] * std::log(g[i]);
    }
    return s;
  };
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 1 + rng.uniform_int(32);
    const auto f = random_pmf(n, rng.bernoulli(0.5));
    const auto g = random_pmf(n, rng.bernoulli(0.2));
    const double self = cross(f, f);
    const double gap = self - cross(f, g);
    const double eq_gap = std::abs(self - cross(f, f));
    rep.slack = std::min(rep.slack, gap);
    if (gap < -kGibbsTol || eq_gap > kGibbsTol) ++violations;
  }
  rep.pass = violations == 0;
  rep.detail = std::to_string(violations) + " violations in " + std::to_string(trials) + " trials";
  return rep;
}

MixtureResult mixture_density(const Testbed& tb, std::size_t grid_points, std::size_t draws, Rng& rng) {
  if (tb.params.arch().latent_dim != 1) throw UnsupportedError("mixture_density: latent dimension must be 1");
  if (tb.corruption.kind != CorruptionKind::none && !tb.corruption.is_discrete())
    throw UnsupportedError("mixture_density: corruption must be enumerable");
  if (grid_points < 2 || draws < 2) throw ConfigError("", "mixture_density: need at least 2 grid points and draws");

  const Outcomes oc = corruption_outcomes(tb.corruption, tb.x);
  const GaussianParams q = encode(tb.params, oc.x_tilde);
  MixtureResult res;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < oc.log_prob.size(); ++i) {
    const double s = std::exp(0.5 * q.logvar(i, 0));
    lo = std::min(lo, q.mu(i, 0) - 4.0 * s);
    hi = std::max(hi, q.mu(i, 0) + 4.0 * s);
    res.weight_sum += std::exp(oc.log_prob[i]);
  }
  auto exact_at = [&](double z) {
    double d = 0.0;
    for (std::size_t i = 0; i < oc.log_prob.size(); ++i) {
      const double zi = z;
      d += std::exp(oc.log_prob[i] + math::gaussian_loglik({&zi, 1}, q.mu.row(i), q.logvar.row(i)));
    }
    return d;
  };

  for (std::size_t g = 0; g < grid_points; ++g) {
    const double z = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_points - 1);
    res.grid.push_back(z);
    res.exact.push_back(exact_at(z));
  }

  // Normalization on a dense grid reaching further into the tails.
  {
    const std::size_t dense = 8001;
    const double a = lo - 4.0, b = hi + 4.0, h = (b - a) / static_cast<double>(dense - 1);
    double s = 0.0;
    for (std::size_t k = 0; k < dense; ++k) {
      const double v = exact_at(a + h * static_cast<double>(k));
      s += (k == 0 || k + 1 == dense) ? 0.5 * v : v;
    }
    res.integral = s * h;
  }

  Matrix xt(draws, tb.x.size());
  for (std::size_t n = 0; n < draws; ++n) corrupt_into(tb.corruption, tb.x, xt.row(n), rng);
  const GaussianParams qs = encode(tb.params, xt);
  std::vector<double> vals(draws);
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double z = res.grid[g];
    for (std::size_t n = 0; n < draws; ++n)
      vals[n] = std::exp(math::gaussian_loglik({&z, 1}, qs.mu.row(n), qs.logvar.row(n)));
    const auto ms = math::mean_std(vals);
    res.mc.push_back(ms.mean);
    res.mc_se.push_back(ms.std / std::sqrt(static_cast<double>(draws)));
    // The rounding allowance only matters when every draw is identical (SE = 0).
    if (std::abs(ms.mean - res.exact[g]) <= 3.0 * res.mc_se.back() + 1e-12 * res.exact[g]) ++res.within_3se;
  }
  return res;
}

CheckReport check_mixture(const Testbed& tb, std::size_t grid_points, std::size_t draws, Rng& rng) {
  const MixtureResult m = mixture_density(tb, grid_points, draws, rng);
  const double frac = static_cast<double>(m.within_3se) / static_cast<double>(grid_points);
  CheckReport rep{"mixture", false, frac - 0.95, 0.0, tb.seed, {}};
  double se = 0.0;
  for (double s : m.mc_se) se = std::max(se, s);
  rep.se = se;
  const bool weights_ok = std::abs(m.weight_sum - 1.0) <= 1e-12;
  const bool integral_ok = std::abs(m.integral - 1.0) <= 1e-3;
  rep.pass = frac >= 0.95 && weights_ok && integral_ok;
  std::ostringstream d;
  d << m.within_3se << "/" << grid_points << " grid points within 3 SE; weight sum " << m.weight_sum
    << "; integral " << m.integral;
  rep.detail = d.str();
  return rep;
}

namespace {

std::vector<CheckReport> sandwich_reports(const ExactBounds& b, std::uint64_t seed) {
  const double upper = b.logpx - b.dvae;
  const double lower = b.dvae - b.cvae;
  return {
      {"sandwich.logpx_ge_dvae", upper > 0.0, upper, 0.0, seed, {}},
      {"sandwich.dvae_ge_cvae", lower > 0.0, lower, 0.0, seed, {}},
  };
}

CheckReport expected_kl_report(const ExactBounds& b, std::uint64_t seed) {
  const double err = std::abs(b.logpx - (b.dvae + b.expected_kl));
  return {"expected_kl", err < kExpectedKlTol && b.expected_kl >= 0.0, kExpectedKlTol - err, 0.0, seed, {}};
}

/// Folds per-testbed reports of one name into a single summary line.
CheckReport fold(const std::string& name, const std::vector<CheckReport>& parts, std::uint64_t seed) {
  CheckReport out{name, true, std::numeric_limits<double>::infinity(), 0.0, seed, {}};
  std::size_t passed = 0;
  for (const auto& p : parts) {
    out.slack = aggregate_min(out.slack, p.slack);
    out.se = std::max(out.se, p.se);
    if (p.pass) ++passed;
  }
  out.pass = passed == parts.size();
  out.detail = std::to_string(passed) + "/" + std::to_string(parts.size()) + " passed";
  return out;
}

}  // namespace

std::vector<CheckReport> check_sandwich(const Testbed& tb) { return sandwich_reports(exact_bounds(tb), tb.seed); }

CheckReport check_expected_kl(const Testbed& tb) { return expected_kl_report(exact_bounds(tb), tb.seed); }

McSandwichCounts mc_sandwich(const Testbed& tb, std::size_t trials, std::size_t draws, std::uint64_t seed) {
  const double logpx = exact_logpx(tb);
  McSandwichCounts c;
  const Rng root(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rd = root.substream("mc-dvae", t);
    Rng rc = root.substream("mc-cvae", t);
    const BoundEstimate dv = dvae_estimate(tb.params, tb.x, tb.corruption, draws, 1, rd);
    const BoundEstimate cv = cvae_estimate(tb.params, tb.x, tb.corruption, draws, 1, rc);
    ++c.trials;
    if (dv.value > logpx + 3.0 * dv.std_error) ++c.upper_violations;
    const double se = std::sqrt(dv.std_error * dv.std_error + cv.std_error * cv.std_error);
    if (dv.value < cv.value - 3.0 * se) ++c.lower_violations;
  }
  return c;
}

std::vector<CheckReport> run_suite(const SuiteOptions& opts) {
  const Rng root(opts.seed);
  std::vector<CheckReport> out;

  Rng gibbs = root.substream("gibbs");
  out.push_back(check_gibbs(gibbs, opts.gibbs_trials));

  {
    TestbedOptions mo;
    mo.input_dim = 6;
    mo.latent_dim = 1;
    mo.level = 0.3;
    const Testbed tb = make_testbed(mo, root.substream("mixture-testbed").next_u64());
    Rng mr = root.substream("mixture");
    out.push_back(check_mixture(tb, 41, opts.mixture_draws, mr));
  }

  std::vector<CheckReport> upper, lower, expected_kl;
  McSandwichCounts mc;
  const std::size_t per_bed = opts.testbeds ? (opts.mc_trials + opts.testbeds - 1) / opts.testbeds : 0;
  for (std::size_t t = 0; t < opts.testbeds; ++t) {
    const std::uint64_t s = root.substream("testbed", t).next_u64();
    const Testbed tb = random_testbed(s);
    try {
      const ExactBounds b = exact_bounds(tb);
      auto sw = sandwich_reports(b, s);
      upper.push_back(sw[0]);
      lower.push_back(sw[1]);
      expected_kl.push_back(expected_kl_report(b, s));
      if (mc.trials < opts.mc_trials) {
        const auto c = mc_sandwich(tb, std::min(per_bed, opts.mc_trials - mc.trials), opts.mc_draws,
                                   root.substream("mc", t).next_u64());
        mc.trials += c.trials;
        mc.upper_violations += c.upper_violations;
        mc.lower_violations += c.lower_violations;
      }
    } catch (const PrecisionError& e) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      for (auto* v : {&upper, &lower, &expected_kl}) v->push_back({"", false, nan, 0.0, s, e.what()});
    }
  }
  out.push_back(fold("sandwich.logpx_ge_dvae", upper, opts.seed));
  out.push_back(fold("sandwich.dvae_ge_cvae", lower, opts.seed));
  out.push_back(fold("expected_kl", expected_kl, opts.seed));

  if (mc.trials > 0) {
    const double n = static_cast<double>(mc.trials);
    const double up = static_cast<double>(mc.upper_violations) / n;
    const double lo = static_cast<double>(mc.lower_violations) / n;
    out.push_back({"sandwich_mc.logpx_ge_dvae", up < 0.01, 0.01 - up, 0.0, opts.seed,
                   std::to_string(mc.upper_violations) + "/" + std::to_string(mc.trials) + " violations"});
    out.push_back({"sandwich_mc.dvae_ge_cvae", lo < 0.01, 0.01 - lo, 0.0, opts.seed,
                   std::to_string(mc.lower_violations) + "/" + std::to_string(mc.trials) + " violations"});
  }

  // Continuous first layer: gaussian corruption of real-valued inputs,
  // integrated over x_tilde by quadrature.
  {
    TestbedOptions go;
    go.input_dim = 2;
    go.latent_dim = 1;
    go.output = OutputFamily::gaussian;
    go.level = 0.2;
    const std::uint64_t s = root.substream("gaussian-testbed").next_u64();
    const Testbed tb = make_testbed(go, s);
    try {
      const ExactBounds b = exact_bounds(tb, 16);
      for (auto r : sandwich_reports(b, s)) {
        r.name = "gaussian_" + r.name;
        out.push_back(r);
      }
      auto p = expected_kl_report(b, s);
      p.name = "gaussian_expected_kl";
      out.push_back(p);
    } catch (const PrecisionError& e) {
      out.push_back({"gaussian_sandwich", false, std::numeric_limits<double>::quiet_NaN(), 0.0, s, e.what()});
    }
  }
  return out;
}

}  // namespace dvae::verify
