#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <set>

#include "dvae/error.hpp"
#include "dvae/math.hpp"
#include "dvae/verify.hpp"
#include "helpers.hpp"

using namespace dvae;

namespace {

double log_normal_pdf(double y, double var) { return -0.5 * (std::log(2 * M_PI * var) + y * y / var); }

verify::Testbed zero_testbed(std::size_t dx, double level) {
  verify::Testbed tb;
  tb.params = Params(testing::tiny_arch(OutputFamily::bernoulli, dx, 3, 1));
  tb.x.assign(dx, 1.0);
  tb.x[0] = 0.0;
  tb.corruption = CorruptionSpec::salt_pepper(level);
  return tb;
}

}  // namespace

TEST_CASE("tensor Gauss-Hermite integrates linear-Gaussian models in closed form") {
  const double y = 0.7, s2 = 0.5;
  const double one = verify::log_integral_std_normal(
      1, 64, [&](std::span<const double> z) { return log_normal_pdf(y - 1.3 * z[0], s2); });
  CHECK(std::abs(one - log_normal_pdf(y, 1.3 * 1.3 + s2)) < 1e-10);
  const double two = verify::log_integral_std_normal(
      2, 60, [&](std::span<const double> z) { return log_normal_pdf(y - 0.8 * z[0] + 0.4 * z[1], s2); });
  CHECK(std::abs(two - log_normal_pdf(y, 0.64 + 0.16 + s2)) < 1e-10);
  // Integrating the constant 0 gives log 1.
  CHECK(std::abs(verify::log_integral_std_normal(2, 10, [](std::span<const double>) { return 0.0; })) < 1e-13);
}

TEST_CASE("a decoder that ignores z has log p(x) = log p(x | z)") {
  Params p(testing::tiny_arch(OutputFamily::bernoulli, 4, 3, 2));
  auto& out = p.layer(p.dec_out_index()).bias;
  out = {0.3, -1.2, 2.0, 0.0};
  const std::vector<double> x{1, 0, 0, 1};
  double expect = 0.0;
  for (std::size_t d = 0; d < 4; ++d) {
    const double q = 1.0 / (1.0 + std::exp(-out[d]));
    expect += x[d] == 1.0 ? std::log(q) : std::log(1.0 - q);
  }
  CHECK(std::abs(verify::logpx_quadrature(p, x, 20) - expect) < 1e-12);
}

TEST_CASE("quadrature is converged at the testbed order") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto tb = verify::random_testbed(s);
    CAPTURE(s);
    const double a = verify::logpx_quadrature(tb.params, tb.x, tb.order);
    const double b = verify::logpx_quadrature(tb.params, tb.x, tb.order + 8);
    CHECK(std::abs(a - b) < 1e-8);
    CHECK(verify::exact_logpx(tb) == a);
  }
}

TEST_CASE("corruption outcomes form a distribution") {
  const std::vector<double> x{1, 0, 1};
  const auto o = verify::corruption_outcomes(CorruptionSpec::salt_pepper(0.3), x);
  double total = 0.0;
  for (double lp : o.log_prob) total += std::exp(lp);
  CHECK(std::abs(total - 1.0) < 1e-14);
  // Each pixel is kept with 0.7 + 0.15 when it matches the coin.
  CHECK(o.x_tilde.rows() == 8);
  const auto none = verify::corruption_outcomes(CorruptionSpec::none(), x);
  CHECK(none.x_tilde.rows() == 1);
  CHECK(none.log_prob[0] == 0.0);
  const auto g = verify::corruption_outcomes(CorruptionSpec::gaussian(0.2), std::vector<double>{0.5, 0.1}, 8);
  CHECK(g.x_tilde.rows() == 64);
  double gt = 0.0, gm = 0.0;
  for (std::size_t i = 0; i < 64; ++i) {
    gt += std::exp(g.log_prob[i]);
    gm += std::exp(g.log_prob[i]) * g.x_tilde(i, 0);
  }
  CHECK(std::abs(gt - 1.0) < 1e-12);
  CHECK(std::abs(gm - 0.5) < 1e-12);
}

TEST_CASE("all bounds coincide for an uninformative model") {
  // Zero parameters: q(z | x~) = p(z), p(x | z) = 2^-D, so every bound is -D ln 2.
  const auto tb = zero_testbed(2, 0.3);
  const auto b = verify::exact_bounds(tb);
  const double expect = -2 * std::log(2.0);
  CHECK(std::abs(b.logpx - expect) < 1e-12);
  CHECK(std::abs(b.dvae - expect) < 1e-12);
  CHECK(std::abs(b.cvae - expect) < 1e-12);
  CHECK(std::abs(b.expected_kl) < 1e-12);
}

TEST_CASE("log p(x) = L_dvae + expected KL, and the ordering of the bounds") {
  for (std::uint64_t s = 0; s < 8; ++s) {
    CAPTURE(s);
    const auto tb = verify::random_testbed(100 + s);
    const auto b = verify::exact_bounds(tb);
    CHECK(std::abs(b.logpx - (b.dvae + b.expected_kl)) < 1e-6);
    CHECK(b.expected_kl >= 0.0);
    CHECK(b.logpx >= b.dvae);
    // Averaging the encoder over corruptions before taking the log can only
    // increase the bound: L_cvae - L_dvae is an expected KL divergence.
    CHECK(b.cvae >= b.dvae - 1e-10);
    CHECK(verify::check_expected_kl(tb).pass);
  }
}

TEST_CASE("marginal encoder density") {
  verify::TestbedOptions o;
  o.input_dim = 5;
  const auto tb = verify::make_testbed(o, 3);
  Rng rng(8);
  const auto m = verify::mixture_density(tb, 21, 50000, rng);
  CHECK(m.grid.size() == 21);
  CHECK(std::abs(m.weight_sum - 1.0) < 1e-12);
  CHECK(std::abs(m.integral - 1.0) < 1e-3);
  CHECK(m.within_3se >= 19);

  // Without corruption the mixture is the single encoder Gaussian.
  auto clean = tb;
  clean.corruption = CorruptionSpec::none();
  Rng r2(9);
  CHECK(verify::check_mixture(clean, 21, 20000, r2).pass);

  auto two_d = verify::make_testbed(verify::TestbedOptions{4, 2}, 1);
  CHECK_THROWS(verify::mixture_density(two_d, 5, 10, r2));
}

TEST_CASE("Gibbs inequality check") {
  Rng rng(11);
  const auto r = verify::check_gibbs(rng, 200);
  CHECK(r.pass);
  CHECK(r.name == "gibbs");
}

TEST_CASE("Monte Carlo sandwich counts") {
  const auto tb = verify::random_testbed(5);
  const auto c = verify::mc_sandwich(tb, 20, 500, 1);
  CHECK(c.trials == 20);
  CHECK(c.upper_violations <= 2);
  const auto again = verify::mc_sandwich(tb, 20, 500, 1);
  CHECK(again.lower_violations == c.lower_violations);
}

TEST_CASE("reports serialize as one JSON object per line") {
  const verify::CheckReport r{"expected_kl", false, -0.5, 0.01, 42, "3/100"};
  const std::string line = verify::to_json_line(r);
  CHECK(line.find('\n') == std::string::npos);
  const auto j = nlohmann::json::parse(line);
  CHECK(j["name"] == "expected_kl");
  CHECK(j["pass"] == false);
  CHECK(j["slack"] == -0.5);
  CHECK(j["se"] == 0.01);
  CHECK(j["seed"] == 42);
  CHECK(j["detail"] == "3/100");
}

TEST_CASE("suite emits every check") {
  verify::SuiteOptions o;
  o.seed = 2;
  o.testbeds = 4;
  o.gibbs_trials = 50;
  o.mc_trials = 8;
  o.mc_draws = 200;
  o.mixture_draws = 20000;
  const auto reports = verify::run_suite(o);
  std::set<std::string> names;
  for (const auto& r : reports) names.insert(r.name);
  for (const char* n : {"gibbs", "mixture", "sandwich.logpx_ge_dvae", "sandwich.dvae_ge_cvae", "expected_kl",
                        "sandwich_mc.logpx_ge_dvae", "sandwich_mc.dvae_ge_cvae", "gaussian_expected_kl"})
    CHECK(names.count(n) == 1);
  for (const auto& r : reports)
    if (r.name == "expected_kl" || r.name == "gibbs" || r.name == "sandwich.logpx_ge_dvae") CHECK(r.pass);
}
