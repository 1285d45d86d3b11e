#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dvae/model.hpp"
#include "dvae/objectives.hpp"
#include "dvae/rng.hpp"

namespace testing {

inline dvae::Matrix random_matrix(std::size_t rows, std::size_t cols, dvae::Rng& rng, double scale = 1.0) {
  dvae::Matrix m(rows, cols);
  for (double& v : m.flat()) v = scale * rng.normal();
  return m;
}

inline dvae::Matrix random_binary(std::size_t rows, std::size_t cols, dvae::Rng& rng, double p = 0.5) {
  dvae::Matrix m(rows, cols);
  for (double& v : m.flat()) v = rng.bernoulli(p) ? 1.0 : 0.0;
  return m;
}

inline dvae::Matrix random_unit(std::size_t rows, std::size_t cols, dvae::Rng& rng) {
  dvae::Matrix m(rows, cols);
  for (double& v : m.flat()) v = rng.uniform();
  return m;
}

inline dvae::Architecture tiny_arch(dvae::OutputFamily out, std::size_t dx = 20, std::size_t hidden = 10,
                                    std::size_t dz = 3) {
  dvae::Architecture a;
  a.input_dim = dx;
  a.latent_dim = dz;
  a.encoder_hidden = {hidden};
  a.decoder_hidden = {hidden, hidden};
  a.output = out;
  return a;
}

/// Params with every weight and bias drawn from N(0, scale^2).
inline dvae::Params random_params(const dvae::Architecture& arch, dvae::Rng& rng, double scale = 0.3) {
  dvae::Params p(arch);
  for (auto t : p.tensors())
    for (double& v : t) v = scale * rng.normal();
  return p;
}

/// Minimized loss: -(1/B) sum_b objective_b.
inline double loss(const dvae::Params& p, const dvae::Matrix& x, const dvae::Draws& d,
                   const dvae::EstimatorConfig& est) {
  const auto v = dvae::evaluate_objective(p, x, d, est);
  double s = 0.0;
  for (double e : v.per_example) s += e;
  return -s / static_cast<double>(v.per_example.size());
}

struct FdResult {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

/// Central differences at `coords` random coordinates. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline FdResult fd_check(dvae::Params p, const dvae::Matrix& x, const dvae::Draws& d, const dvae::EstimatorConfig& est,
                         std::size_t coords, dvae::Rng& rng, double h = 1e-5, double floor = 1e-3) {
  const auto g = dvae::backward(p, x, d, est);
  FdResult r;
  const std::size_t n = p.num_parameters();
  for (std::size_t c = 0; c < coords; ++c) {
    const std::size_t i = rng.uniform_int(n);
    const double orig = p.scalar(i);
    p.scalar(i) = orig + h;
    const double up = loss(p, x, d, est);
    p.scalar(i) = orig - h;
    const double down = loss(p, x, d, est);
    p.scalar(i) = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = g.grad.scalar(i);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    r.max_rel = std::max(r.max_rel, std::abs(analytic - numeric) / denom);
    ++r.checked;
  }
  return r;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dvae-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace testing
