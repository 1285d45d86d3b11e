#include "dvae/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dvae/error.hpp"

namespace dvae::math {

double logsumexp(std::span<const double> v) {
  if (v.empty()) throw Error("empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double log_mean_exp(std::span<const double> v) {
  return logsumexp(v) - std::log(static_cast<double>(v.size()));
}

double softplus(double x) noexcept {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double clamp_prob(double p) noexcept { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

double bernoulli_loglik(std::span<const double> x, std::span<const double> p) {
  if (x.size() != p.size()) throw ShapeError("bernoulli_loglik: dimension mismatch");
  double s = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double q = clamp_prob(p[d]);
    // Binary targets need one log; the result is bitwise the same.
    if (x[d] == 1.0)
      s += std::log(q);
    else if (x[d] == 0.0)
      s += std::log1p(-q);
    else
      s += x[d] * std::log(q) + (1.0 - x[d]) * std::log1p(-q);
  }
  return s;
}

double gaussian_loglik(std::span<const double> x, std::span<const double> mu,
                       std::span<const double> logvar) {
  if (x.size() != mu.size() || x.size() != logvar.size())
    throw ShapeError("gaussian_loglik: dimension mismatch");
  double s = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double r = x[d] - mu[d];
    s += -0.5 * kLog2Pi - 0.5 * logvar[d] - 0.5 * r * r * std::exp(-logvar[d]);
  }
  return s;
}

double std_normal_logpdf(std::span<const double> z) noexcept {
  double s = 0.0;
  for (double v : z) s += -0.5 * kLog2Pi - 0.5 * v * v;
  return s;
}

double kl_diag_gauss_std(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size()) throw ShapeError("kl_diag_gauss_std: dimension mismatch");
  double s = 0.0;
  // expm1(lv) - lv keeps precision near lv = 0.
  for (std::size_t d = 0; d < mu.size(); ++d) s += mu[d] * mu[d] + std::expm1(logvar[d]) - logvar[d];
  return 0.5 * s;
}

QuadratureRule gauss_hermite_nodes(int n) {
  if (n < 1 || n > 64) throw Error("gauss_hermite_nodes: n must be in [1, 64], got " + std::to_string(n));
  // Newton iteration on orthonormal physicists' Hermite polynomials, then
  // rescale from weight exp(-x^2) to the standard normal density.
  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  std::vector<double> x(n), w(n);
  const int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[i - 2];
    }
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }
  if (n % 2 == 1) x[m - 1] = 0.0;

  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
  // Ascending node order.
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = std::numbers::sqrt2 * x[n - 1 - i];
    rule.weights[i] = w[n - 1 - i] * inv_sqrt_pi;
  }
  return rule;
}

MeanStd mean_std(std::span<const double> v) {
  MeanStd r;
  if (v.empty()) return r;
  double s = 0.0;
  for (double x : v) s += x;
  r.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

}  // namespace dvae::math
