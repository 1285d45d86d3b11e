#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dvae/error.hpp"
#include "dvae/math.hpp"
#include "helpers.hpp"

using namespace dvae;

namespace {

Draws draws_for(const Matrix& x, const CorruptionSpec& c, const EstimatorConfig& est, std::size_t dz,
                std::uint64_t seed) {
  Rng rng(seed);
  return sample_draws(x, c, est, dz, rng);
}

}  // namespace

TEST_CASE("architecture validation") {
  Architecture a;
  CHECK_NOTHROW(a.validate());
  a.encoder_hidden = {};
  CHECK_THROWS_AS(a.validate(), ConfigError);
  a.encoder_hidden = {200, 200, 200};
  CHECK_THROWS_AS(a.validate(), ConfigError);
}

TEST_CASE("parameter layout") {
  const auto arch = testing::tiny_arch(OutputFamily::gaussian);
  Params p(arch);
  // encoder trunk, mean, logvar, 2 decoder trunk, output, output logvar
  REQUIRE(p.layers().size() == 7);
  CHECK(p.layer(p.enc_mean_index()).weight.cols() == 3);
  CHECK(p.layer(p.dec_out_index()).weight.cols() == 20);
  std::size_t n = 0;
  for (auto t : p.tensors()) n += t.size();
  CHECK(n == p.num_parameters());
  p.scalar(n - 1) = 2.5;
  CHECK(p.layers().back().bias.back() == 2.5);
  CHECK_THROWS(p.scalar(n));
  CHECK(Params(testing::tiny_arch(OutputFamily::bernoulli)).layers().size() == 6);
}

TEST_CASE("Glorot initialization bounds and zero biases") {
  Rng rng(1);
  const Params p = init_params(Architecture{}, rng);
  for (const auto& l : p.layers()) {
    const double limit = std::sqrt(6.0 / double(l.weight.rows() + l.weight.cols()));
    for (double w : l.weight.flat()) CHECK(std::abs(w) <= limit);
    for (double b : l.bias) CHECK(b == 0.0);
  }
}

TEST_CASE("zero parameters give the prior encoder and a uniform decoder") {
  const Architecture arch = testing::tiny_arch(OutputFamily::bernoulli);
  const Params p(arch);
  Rng rng(2);
  const Matrix x = testing::random_binary(4, 20, rng);
  const auto q = encode(p, x);
  for (double v : q.mu.flat()) CHECK(v == 0.0);
  for (double v : q.logvar.flat()) CHECK(v == 0.0);
  const Matrix z = testing::random_matrix(4, 3, rng);
  const auto out = decode(p, z);
  for (double v : out.mean.flat()) CHECK(v == 0.5);
  for (double ll : output_loglik(arch.output, out, x)) CHECK(ll == doctest::Approx(-20 * std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("encoder log-variance is clamped") {
  const Architecture arch = testing::tiny_arch(OutputFamily::bernoulli);
  Params p(arch);
  for (auto& b : p.layer(p.enc_logvar_index()).bias) b = 50.0;
  const auto q = encode(p, Matrix(1, 20));
  for (double v : q.logvar.flat()) CHECK(v == kLogVarMax);
}

TEST_CASE("non-finite activations report the layer") {
  const Architecture arch = testing::tiny_arch(OutputFamily::bernoulli);
  Params p(arch);
  p.layer(0).bias[0] = NAN;
  try {
    encode(p, Matrix(1, 20));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.layer() == 0);
  }
}

TEST_CASE("reparameterized sample") {
  GaussianParams g{Matrix(1, 2, {1.0, -1.0}), Matrix(1, 2, {0.0, std::log(4.0)})};
  const Matrix eps(1, 2, {0.5, 0.5});
  const Matrix z = reparam_sample(g, eps);
  CHECK(z(0, 0) == doctest::Approx(1.5));
  CHECK(z(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("log weights match an independent per-draw computation") {
  const Architecture arch = testing::tiny_arch(OutputFamily::bernoulli, 8, 5, 2);
  Rng rng(4);
  const Params p = testing::random_params(arch, rng);
  const Matrix x = testing::random_binary(3, 8, rng);
  const EstimatorConfig est{Objective::dvae, 2, 3, false};
  const Draws d = draws_for(x, CorruptionSpec::salt_pepper(0.2), est, 2, 9);
  const auto v = evaluate_objective(p, x, d, est);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t m = 0; m < 2; ++m)
      for (std::size_t k = 0; k < 3; ++k) {
        const auto q = encode(p, Matrix(1, 8, std::vector<double>(d.x_tilde.row(b * 2 + m).begin(),
                                                                  d.x_tilde.row(b * 2 + m).end())));
        const auto eps = d.eps.row((b * 2 + m) * 3 + k);
        Matrix z(1, 2);
        for (int j = 0; j < 2; ++j) z(0, j) = q.mu(0, j) + std::exp(0.5 * q.logvar(0, j)) * eps[j];
        const auto out = decode(p, z);
        const double lp = math::bernoulli_loglik(x.row(b), out.mean.row(0)) + math::std_normal_logpdf(z.row(0));
        const double lq = math::gaussian_loglik(z.row(0), q.mu.row(0), q.logvar.row(0));
        CHECK(v.log_weights(b, m * 3 + k) == doctest::Approx(lp - lq).epsilon(1e-12));
      }
}

TEST_CASE("analytic gradients match central differences") {
  for (auto family : {OutputFamily::bernoulli, OutputFamily::gaussian}) {
    for (auto obj : {Objective::vae, Objective::dvae, Objective::iwae, Objective::diwae}) {
      CAPTURE(to_string(obj));
      CAPTURE(to_string(family));
      const Architecture arch = testing::tiny_arch(family, 12, 6, 3);
      Rng rng(17);
      const Params p = testing::random_params(arch, rng);
      const Matrix x = family == OutputFamily::bernoulli ? testing::random_binary(4, 12, rng)
                                                         : testing::random_unit(4, 12, rng);
      const auto corruption =
          family == OutputFamily::bernoulli ? CorruptionSpec::salt_pepper(0.2) : CorruptionSpec::gaussian(0.1);
      const EstimatorConfig est{obj, 2, 3, false};
      const Draws d = draws_for(x, corruption, est, 3, 23);
      const auto r = testing::fd_check(p, x, d, est, 60, rng);
      CHECK(r.max_rel < 1e-5);
    }
  }
  SUBCASE("analytic KL variant") {
    const Architecture arch = testing::tiny_arch(OutputFamily::bernoulli, 12, 6, 3);
    Rng rng(5);
    const Params p = testing::random_params(arch, rng);
    const Matrix x = testing::random_binary(4, 12, rng);
    const EstimatorConfig est{Objective::vae, 1, 2, true};
    const Draws d = draws_for(x, CorruptionSpec::none(), est, 3, 1);
    CHECK(testing::fd_check(p, x, d, est, 60, rng).max_rel < 1e-5);
  }
}

TEST_CASE("checkpoint round trip and corruption detection") {
  const Architecture arch = testing::tiny_arch(OutputFamily::gaussian);
  Rng rng(8);
  const Params p = testing::random_params(arch, rng);
  std::stringstream ss;
  write_checkpoint(ss, p);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "DVAE");
  std::stringstream in(bytes);
  CHECK(read_checkpoint(in) == p);

  std::stringstream bad("XVAE" + bytes.substr(4));
  CHECK_THROWS_AS(read_checkpoint(bad), ParseError);
  std::stringstream cut(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_checkpoint(cut), ParseError);
}
