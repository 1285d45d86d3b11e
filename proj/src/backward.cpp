#include <cmath>

#include "dvae/error.hpp"
#include "dvae/kernels.hpp"
#include "dvae/math.hpp"
#include "dvae/model.hpp"

namespace dvae {

namespace {

struct Forward {
  EncoderCache enc;
  GaussianParams q;
  Matrix z;
  DecoderCache dec;
  DecoderOutput out;
  Matrix targets;
  std::vector<double> recon;  // log p(x | z) per decoded row
  std::vector<double> kl;     // analytic KL per encoded row (analytic_kl only)
  ObjectiveValue value;
};

void check_draws(const Params& params, const Matrix& x, const Draws& d) {
  const auto& arch = params.arch();
  if (d.M == 0 || d.K == 0) throw ShapeError("draws: M and K must be >= 1");
  require_shape(x, x.rows(), arch.input_dim, "objective: x");
  require_shape(d.x_tilde, x.rows() * d.M, arch.input_dim, "objective: x_tilde");
  require_shape(d.eps, x.rows() * d.M * d.K, arch.latent_dim, "objective: eps");
}

Forward run_forward(const Params& params, const Matrix& x, const Draws& draws, const EstimatorConfig& est) {
  check_draws(params, x, draws);
  const std::size_t B = x.rows(), K = draws.K, MK = draws.M * draws.K, Dz = params.arch().latent_dim;
  const std::size_t rows = B * MK;
  Forward f;
  f.q = encode(params, draws.x_tilde, &f.enc);

  f.z.resize(rows, Dz);
  for (std::size_t r = 0; r < rows; ++r) {
    auto mu = f.q.mu.row(r / K);
    auto lv = f.q.logvar.row(r / K);
    auto eps = draws.eps.row(r);
    auto z = f.z.row(r);
    for (std::size_t j = 0; j < Dz; ++j) z[j] = mu[j] + std::exp(0.5 * lv[j]) * eps[j];
  }
  f.out = decode(params, f.z, &f.dec);

  f.targets.resize(rows, x.cols());
  for (std::size_t r = 0; r < rows; ++r) {
    auto src = x.row(r / MK);
    std::copy(src.begin(), src.end(), f.targets.row(r).begin());
  }
  f.recon = output_loglik(params.arch().output, f.out, f.targets);

  f.value.log_weights.resize(B, MK);
  for (std::size_t r = 0; r < rows; ++r) {
    auto lv = f.q.logvar.row(r / K);
    auto eps = draws.eps.row(r);
    double log_q = 0.0;
    for (std::size_t j = 0; j < Dz; ++j) log_q += -0.5 * math::kLog2Pi - 0.5 * lv[j] - 0.5 * eps[j] * eps[j];
    const double lw = f.recon[r] + math::std_normal_logpdf(f.z.row(r)) - log_q;
    if (!std::isfinite(lw)) throw NumericError("non-finite log importance ratio");
    f.value.log_weights.data()[r] = lw;
  }

  f.value.per_example.resize(B);
  if (est.analytic_kl) {
    f.kl.resize(B * draws.M);
    for (std::size_t e = 0; e < f.kl.size(); ++e) f.kl[e] = math::kl_diag_gauss_std(f.q.mu.row(e), f.q.logvar.row(e));
    for (std::size_t b = 0; b < B; ++b) {
      double rec = 0.0, kl = 0.0;
      for (std::size_t j = 0; j < MK; ++j) rec += f.recon[b * MK + j];
      for (std::size_t m = 0; m < draws.M; ++m) kl += f.kl[b * draws.M + m];
      f.value.per_example[b] = rec / static_cast<double>(MK) - kl / static_cast<double>(draws.M);
    }
  } else if (est.importance_weighted()) {
    for (std::size_t b = 0; b < B; ++b) f.value.per_example[b] = math::log_mean_exp(f.value.log_weights.row(b));
  } else {
    for (std::size_t b = 0; b < B; ++b) {
      double s = 0.0;
      for (double v : f.value.log_weights.row(b)) s += v;
      f.value.per_example[b] = s / static_cast<double>(MK);
    }
  }
  return f;
}

void check_finite(const Matrix& m, std::size_t layer) {
  for (double v : m.flat())
    if (!std::isfinite(v)) throw NumericError("non-finite gradient", static_cast<int>(layer));
}

void activation_backward(Activation act, const Matrix& pre, const Matrix& out, Matrix& grad) {
  double* g = grad.data();
  const std::size_t n = grad.size();
  if (act == Activation::tanh) {
    const double* a = out.data();
    for (std::size_t i = 0; i < n; ++i) g[i] *= 1.0 - a[i] * a[i];
  } else {
    const double* p = pre.data();
    for (std::size_t i = 0; i < n; ++i) g[i] *= math::sigmoid(p[i]);
  }
}

// Weight and bias gradient of layer `li` given the gradient at its output;
// returns the gradient at its input when wanted.
void dense_backward(const Params& params, Params& grad, std::size_t li, const Matrix& input, const Matrix& dout,
                    Matrix* dinput, bool accumulate_input) {
  Dense& g = grad.layer(li);
  kernels::matmul_tn(input, dout, g.weight);
  kernels::column_sums(dout, g.bias);
  check_finite(g.weight, li);
  if (dinput) {
    Matrix tmp;
    kernels::matmul_nt(dout, params.layer(li).weight, tmp);
    if (accumulate_input) {
      for (std::size_t i = 0; i < tmp.size(); ++i) dinput->data()[i] += tmp.data()[i];
    } else {
      *dinput = std::move(tmp);
    }
  }
}

}  // namespace

ObjectiveValue evaluate_objective(const Params& params, const Matrix& x, const Draws& draws,
                                  const EstimatorConfig& est) {
  return run_forward(params, x, draws, est).value;
}

Gradient backward(const Params& params, const Matrix& x, const Draws& draws, const EstimatorConfig& est) {
  Forward f = run_forward(params, x, draws, est);
  const auto& arch = params.arch();
  const std::size_t B = x.rows(), M = draws.M, K = draws.K, MK = M * K, Dz = arch.latent_dim;
  const std::size_t rows = B * MK;
  const double inv_b = 1.0 / static_cast<double>(B);

  // Upstream weight on each row's log ratio (or reconstruction term) in the loss.
  std::vector<double> w(rows);
  if (est.importance_weighted() && !est.analytic_kl) {
    for (std::size_t b = 0; b < B; ++b) {
      auto lw = f.value.log_weights.row(b);
      const double lse = math::logsumexp(lw);
      for (std::size_t j = 0; j < MK; ++j) w[b * MK + j] = -std::exp(lw[j] - lse) * inv_b;
    }
  } else {
    std::fill(w.begin(), w.end(), -inv_b / static_cast<double>(MK));
  }

  Gradient result{Params(arch), std::move(f.value)};
  Params& grad = result.grad;

  // Decoder head(s).
  Matrix d_out(rows, arch.input_dim);
  Matrix d_lv;
  if (arch.output == OutputFamily::bernoulli) {
    for (std::size_t r = 0; r < rows; ++r) {
      auto p = f.out.mean.row(r);
      auto t = f.targets.row(r);
      auto d = d_out.row(r);
      for (std::size_t j = 0; j < arch.input_dim; ++j) {
        const bool clamped = p[j] < math::kProbClamp || p[j] > 1.0 - math::kProbClamp;
        d[j] = clamped ? 0.0 : w[r] * (t[j] - p[j]);
      }
    }
  } else {
    d_lv.resize(rows, arch.input_dim);
    for (std::size_t r = 0; r < rows; ++r) {
      auto m = f.out.mean.row(r);
      auto lv = f.out.logvar.row(r);
      auto lvp = f.dec.logvar_pre.row(r);
      auto t = f.targets.row(r);
      auto dm = d_out.row(r);
      auto dv = d_lv.row(r);
      for (std::size_t j = 0; j < arch.input_dim; ++j) {
        const double inv_var = std::exp(-lv[j]);
        const double res = t[j] - m[j];
        dm[j] = w[r] * res * inv_var * m[j] * (1.0 - m[j]);
        const bool inside = lvp[j] >= kLogVarMin && lvp[j] <= kLogVarMax;
        dv[j] = inside ? w[r] * (-0.5 + 0.5 * res * res * inv_var) : 0.0;
      }
    }
  }

  Matrix dh;
  dense_backward(params, grad, params.dec_out_index(), f.dec.activations.back(), d_out, &dh, false);
  if (arch.output == OutputFamily::gaussian)
    dense_backward(params, grad, params.dec_logvar_index(), f.dec.activations.back(), d_lv, &dh, true);

  for (std::size_t i = params.decoder_depth(); i-- > 0;) {
    const std::size_t li = params.dec_trunk_index(i);
    activation_backward(arch.activation, f.dec.pre[i], f.dec.activations[i + 1], dh);
    Matrix din;
    dense_backward(params, grad, li, f.dec.activations[i], dh, &din, false);
    check_finite(din, li);
    dh = std::move(din);
  }
  // dh is now d(loss)/dz through the decoder.

  const std::size_t enc_rows = B * M;
  Matrix d_mu(enc_rows, Dz), d_elv(enc_rows, Dz);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t e = r / K;
    auto z = f.z.row(r);
    auto eps = draws.eps.row(r);
    auto lv = f.q.logvar.row(e);
    auto gz_dec = dh.row(r);
    auto dmu = d_mu.row(e);
    auto dlv = d_elv.row(e);
    for (std::size_t j = 0; j < Dz; ++j) {
      // log p(z) contributes -z; -log q(z | x_tilde) contributes +0.5 per logvar.
      const double gz = est.analytic_kl ? gz_dec[j] : gz_dec[j] - w[r] * z[j];
      dmu[j] += gz;
      dlv[j] += gz * 0.5 * std::exp(0.5 * lv[j]) * eps[j];
      if (!est.analytic_kl) dlv[j] += 0.5 * w[r];
    }
  }
  if (est.analytic_kl) {
    const double c = inv_b / static_cast<double>(M);
    for (std::size_t e = 0; e < enc_rows; ++e) {
      auto mu = f.q.mu.row(e);
      auto lv = f.q.logvar.row(e);
      auto dmu = d_mu.row(e);
      auto dlv = d_elv.row(e);
      for (std::size_t j = 0; j < Dz; ++j) {
        dmu[j] += c * mu[j];
        dlv[j] += c * 0.5 * std::expm1(lv[j]);
      }
    }
  }
  for (std::size_t i = 0; i < d_elv.size(); ++i) {
    const double pre = f.enc.logvar_pre.data()[i];
    if (pre < kLogVarMin || pre > kLogVarMax) d_elv.data()[i] = 0.0;
  }

  dense_backward(params, grad, params.enc_mean_index(), f.enc.activations.back(), d_mu, &dh, false);
  dense_backward(params, grad, params.enc_logvar_index(), f.enc.activations.back(), d_elv, &dh, true);
  for (std::size_t i = params.encoder_depth(); i-- > 0;) {
    activation_backward(arch.activation, f.enc.pre[i], f.enc.activations[i + 1], dh);
    Matrix din;
    dense_backward(params, grad, i, f.enc.activations[i], dh, i > 0 ? &din : nullptr, false);
    if (i > 0) {
      check_finite(din, i);
      dh = std::move(din);
    }
  }
  return result;
}

}  // namespace dvae
