#include <doctest.h>

#include <set>

#include "dvae/config.hpp"
#include "dvae/error.hpp"

using namespace dvae;

namespace {

ConfigMap minimal() {
  ConfigMap c;
  c.set("dataset.path", "/data/mnist");
  return c;
}

std::string error_key(const ConfigMap& c) {
  try {
    make_run_config(c).validate();
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST_CASE("key=value parsing with comments and overrides") {
  const auto c = ConfigMap::parse("# a comment\nobjective = diwae  # trailing\n\nsamples.K=5\nsamples.K = 7\n");
  CHECK(c.values().at("objective") == "diwae");
  CHECK(c.values().at("samples.K") == "7");
  CHECK_THROWS_AS(ConfigMap::parse("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(ConfigMap::parse("=value\n"), ConfigError);
  CHECK_THROWS(ConfigMap::load("/nonexistent/run.cfg"));
}

TEST_CASE("defaults describe the desk-scale DVAE protocol") {
  const RunConfig rc = make_run_config(minimal());
  CHECK(rc.dataset == "mnist");
  CHECK(rc.train_subset == 10000);
  CHECK(rc.arch.input_dim == 784);
  CHECK(rc.arch.latent_dim == 50);
  CHECK(rc.arch.encoder_hidden == std::vector<std::size_t>{200});
  CHECK(rc.arch.decoder_hidden == std::vector<std::size_t>{200, 200});
  CHECK(rc.arch.activation == Activation::softplus);
  CHECK(rc.arch.output == OutputFamily::bernoulli);
  CHECK(rc.estimator.objective == Objective::dvae);
  CHECK(rc.estimator.M == 1);
  CHECK(rc.estimator.K == 1);
  CHECK(rc.corruption.kind == CorruptionKind::none);
  CHECK(rc.adam.lr == 1e-3);
  CHECK(rc.batch_size == 100);
  CHECK(rc.epochs == 30);
  CHECK(rc.seeds.size() == 5);
  CHECK(rc.eval.M == 5);
}

TEST_CASE("derived settings") {
  auto c = minimal();
  c.set("objective", "iwae");
  c.set("corruption.level", "0.05");
  RunConfig rc = make_run_config(c);
  CHECK(rc.arch.activation == Activation::tanh);
  CHECK(rc.corruption.kind == CorruptionKind::salt_pepper);
  CHECK(rc.corruption.level == 0.05);
  CHECK(rc.corruption_at(0.0).kind == CorruptionKind::none);

  c.set("dataset.name", "frey");
  rc = make_run_config(c);
  CHECK(rc.arch.input_dim == 560);
  CHECK(rc.arch.output == OutputFamily::gaussian);
  CHECK(rc.corruption.kind == CorruptionKind::gaussian);

  c = minimal();
  c.set("dataset.full_scale", "true");
  CHECK(make_run_config(c).train_subset == 0);
}

TEST_CASE("errors name the offending key") {
  CHECK(error_key(ConfigMap{}) == "dataset.path");
  auto c = minimal();
  c.set("samples.Q", "3");
  CHECK(error_key(c) == "samples.Q");
  c = minimal();
  c.set("samples.M", "-2");
  CHECK(error_key(c) == "samples.M");
  c = minimal();
  c.set("train.epochs", "ten");
  CHECK(error_key(c) == "train.epochs");
  c = minimal();
  c.set("analytic_kl", "maybe");
  CHECK(error_key(c) == "analytic_kl");
  c = minimal();
  c.set("corruption.kind", "gaussian");
  c.set("corruption.level", "0.1");
  CHECK(error_key(c) == "corruption.kind");
  c = minimal();
  c.set("objective", "diwae");
  c.set("analytic_kl", "true");
  CHECK_FALSE(error_key(c).empty());
}

TEST_CASE("every documented key is accepted and the help lists it") {
  const std::string help = config_help();
  ConfigMap c = minimal();
  std::set<std::string> keys;
  for (const auto& k : config_schema()) {
    CHECK(help.find(std::string(k.key)) != std::string::npos);
    CHECK(keys.insert(std::string(k.key)).second);
    if (k.key != "dataset.path" && !k.default_value.empty()) c.set(std::string(k.key), std::string(k.default_value));
  }
  CHECK_NOTHROW(make_run_config(c).validate());
}

TEST_CASE("formatted config parses back to the same run") {
  auto c = minimal();
  c.set("objective", "diwae");
  c.set("samples.K", "5");
  c.set("corruption.level", "0.15");
  c.set("train.seeds", "3,4");
  const RunConfig a = make_run_config(c);
  const RunConfig b = make_run_config(ConfigMap::parse(format_run_config(a)));
  CHECK(format_run_config(a) == format_run_config(b));
  CHECK(b.estimator.K == 5);
  CHECK(b.corruption.level == 0.15);
  CHECK(b.seeds == std::vector<std::uint64_t>{3, 4});
}
