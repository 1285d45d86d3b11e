#include "dvae/model.hpp"

#include <algorithm>
#include <cmath>

#include "dvae/error.hpp"
#include "dvae/kernels.hpp"
#include "dvae/math.hpp"

namespace dvae {

std::string_view to_string(Activation a) noexcept { return a == Activation::tanh ? "tanh" : "softplus"; }
std::string_view to_string(OutputFamily f) noexcept {
  return f == OutputFamily::gaussian ? "gaussian" : "bernoulli";
}

Activation parse_activation(std::string_view s) {
  if (s == "softplus") return Activation::softplus;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("model.activation", "unknown activation '" + std::string(s) + "'");
}

OutputFamily parse_output_family(std::string_view s) {
  if (s == "bernoulli") return OutputFamily::bernoulli;
  if (s == "gaussian") return OutputFamily::gaussian;
  throw ConfigError("model.output", "unknown output family '" + std::string(s) + "'");
}

void Architecture::validate() const {
  if (input_dim == 0) throw ConfigError("model.input_dim", "must be >= 1");
  if (latent_dim == 0) throw ConfigError("model.latent_dim", "must be >= 1");
  if (encoder_hidden.empty() || encoder_hidden.size() > 2)
    throw ConfigError("model.encoder_layers", "encoder needs 1 or 2 hidden layers");
  if (decoder_hidden.empty() || decoder_hidden.size() > 2)
    throw ConfigError("model.decoder_layers", "decoder needs 1 or 2 hidden layers");
  for (auto w : encoder_hidden)
    if (w == 0) throw ConfigError("model.hidden", "hidden widths must be >= 1");
  for (auto w : decoder_hidden)
    if (w == 0) throw ConfigError("model.hidden", "hidden widths must be >= 1");
}

namespace {

Dense zero_dense(std::size_t in, std::size_t out) { return Dense{Matrix(in, out), std::vector<double>(out, 0.0)}; }

}  // namespace

Params::Params(const Architecture& arch) : arch_(arch) {
  arch_.validate();
  std::size_t in = arch.input_dim;
  for (auto w : arch.encoder_hidden) {
    layers_.push_back(zero_dense(in, w));
    in = w;
  }
  layers_.push_back(zero_dense(in, arch.latent_dim));
  layers_.push_back(zero_dense(in, arch.latent_dim));
  in = arch.latent_dim;
  for (auto w : arch.decoder_hidden) {
    layers_.push_back(zero_dense(in, w));
    in = w;
  }
  layers_.push_back(zero_dense(in, arch.input_dim));
  if (arch.output == OutputFamily::gaussian) layers_.push_back(zero_dense(in, arch.input_dim));
}

std::size_t Params::num_parameters() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

std::vector<std::span<double>> Params::tensors() {
  std::vector<std::span<double>> t;
  for (auto& l : layers_) {
    t.push_back(l.weight.flat());
    t.push_back(l.bias);
  }
  return t;
}

std::vector<std::span<const double>> Params::tensors() const {
  std::vector<std::span<const double>> t;
  for (const auto& l : layers_) {
    t.push_back(l.weight.flat());
    t.push_back(l.bias);
  }
  return t;
}

double& Params::scalar(std::size_t flat_index) {
  for (auto& l : layers_) {
    if (flat_index < l.weight.size()) return l.weight.data()[flat_index];
    flat_index -= l.weight.size();
    if (flat_index < l.bias.size()) return l.bias[flat_index];
    flat_index -= l.bias.size();
  }
  throw Error("Params::scalar: index out of range");
}

double Params::scalar(std::size_t flat_index) const { return const_cast<Params*>(this)->scalar(flat_index); }

bool Params::all_finite() const noexcept {
  for (auto t : tensors())
    for (double v : t)
      if (!std::isfinite(v)) return false;
  return true;
}

Params init_params(const Architecture& arch, Rng& rng) {
  Params p(arch);
  for (auto& l : p.layers()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
    for (double& w : l.weight.flat()) w = (2.0 * rng.uniform() - 1.0) * limit;
  }
  return p;
}

namespace {

void apply_activation(Activation act, const Matrix& pre, Matrix& out) {
  out.resize(pre.rows(), pre.cols());
  const double* s = pre.data();
  double* d = out.data();
  const std::size_t n = pre.size();
  if (act == Activation::tanh) {
    for (std::size_t i = 0; i < n; ++i) d[i] = std::tanh(s[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) d[i] = math::softplus(s[i]);
  }
}

void check_finite(const Matrix& m, int layer, const char* what) {
  for (double v : m.flat())
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what, layer);
}

void affine(const Matrix& in, const Dense& l, Matrix& out) {
  kernels::matmul(in, l.weight, out);
  kernels::add_row_vector(out, l.bias);
}

Matrix clamp_logvar(const Matrix& pre) {
  Matrix out = pre;
  for (double& v : out.flat()) v = std::clamp(v, kLogVarMin, kLogVarMax);
  return out;
}

}  // namespace

GaussianParams encode(const Params& params, const Matrix& x_tilde, EncoderCache* cache) {
  const auto& arch = params.arch();
  if (x_tilde.cols() != arch.input_dim) throw ShapeError("encode: input width != input_dim");
  EncoderCache local;
  EncoderCache& c = cache ? *cache : local;
  c.activations.assign(1, x_tilde);
  c.pre.clear();
  for (std::size_t i = 0; i < params.encoder_depth(); ++i) {
    Matrix pre, act;
    affine(c.activations.back(), params.layer(i), pre);
    apply_activation(arch.activation, pre, act);
    check_finite(act, static_cast<int>(i), "encoder activation");
    c.pre.push_back(std::move(pre));
    c.activations.push_back(std::move(act));
  }
  GaussianParams g;
  affine(c.activations.back(), params.layer(params.enc_mean_index()), g.mu);
  affine(c.activations.back(), params.layer(params.enc_logvar_index()), c.logvar_pre);
  check_finite(g.mu, static_cast<int>(params.enc_mean_index()), "encoder mean");
  check_finite(c.logvar_pre, static_cast<int>(params.enc_logvar_index()), "encoder log-variance");
  g.logvar = clamp_logvar(c.logvar_pre);
  return g;
}

DecoderOutput decode(const Params& params, const Matrix& z, DecoderCache* cache) {
  const auto& arch = params.arch();
  if (z.cols() != arch.latent_dim) throw ShapeError("decode: input width != latent_dim");
  DecoderCache local;
  DecoderCache& c = cache ? *cache : local;
  c.activations.assign(1, z);
  c.pre.clear();
  for (std::size_t i = 0; i < params.decoder_depth(); ++i) {
    const std::size_t li = params.dec_trunk_index(i);
    Matrix pre, act;
    affine(c.activations.back(), params.layer(li), pre);
    apply_activation(arch.activation, pre, act);
    check_finite(act, static_cast<int>(li), "decoder activation");
    c.pre.push_back(std::move(pre));
    c.activations.push_back(std::move(act));
  }
  DecoderOutput out;
  affine(c.activations.back(), params.layer(params.dec_out_index()), c.out_pre);
  check_finite(c.out_pre, static_cast<int>(params.dec_out_index()), "decoder output");
  out.mean.resize(c.out_pre.rows(), c.out_pre.cols());
  for (std::size_t i = 0; i < c.out_pre.size(); ++i) out.mean.data()[i] = math::sigmoid(c.out_pre.data()[i]);
  if (arch.output == OutputFamily::gaussian) {
    affine(c.activations.back(), params.layer(params.dec_logvar_index()), c.logvar_pre);
    check_finite(c.logvar_pre, static_cast<int>(params.dec_logvar_index()), "decoder log-variance");
    out.logvar = clamp_logvar(c.logvar_pre);
  }
  return out;
}

Matrix reparam_sample(const GaussianParams& g, const Matrix& eps) {
  if (!eps.same_shape(g.mu) || !g.logvar.same_shape(g.mu)) throw ShapeError("reparam_sample: shape mismatch");
  Matrix z(eps.rows(), eps.cols());
  for (std::size_t i = 0; i < z.size(); ++i)
    z.data()[i] = g.mu.data()[i] + std::exp(0.5 * g.logvar.data()[i]) * eps.data()[i];
  return z;
}

std::vector<double> output_loglik(OutputFamily family, const DecoderOutput& out, const Matrix& targets) {
  if (!targets.same_shape(out.mean)) throw ShapeError("output_loglik: target shape mismatch");
  std::vector<double> ll(targets.rows());
  for (std::size_t r = 0; r < targets.rows(); ++r) {
    ll[r] = family == OutputFamily::bernoulli
                ? math::bernoulli_loglik(targets.row(r), out.mean.row(r))
                : math::gaussian_loglik(targets.row(r), out.mean.row(r), out.logvar.row(r));
  }
  return ll;
}

}  // namespace dvae
