#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dvae/estimator.hpp"
#include "dvae/matrix.hpp"
#include "dvae/rng.hpp"

namespace dvae {

enum class Activation : std::uint32_t { softplus = 0, tanh = 1 };
enum class OutputFamily : std::uint32_t { bernoulli = 0, gaussian = 1 };

std::string_view to_string(Activation a) noexcept;
std::string_view to_string(OutputFamily f) noexcept;
Activation parse_activation(std::string_view s);
OutputFamily parse_output_family(std::string_view s);

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

struct Architecture {
  std::size_t input_dim = 784;
  std::size_t latent_dim = 50;
  std::vector<std::size_t> encoder_hidden{200};
  std::vector<std::size_t> decoder_hidden{200, 200};
  Activation activation = Activation::softplus;
  OutputFamily output = OutputFamily::bernoulli;

  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Fully connected layer: y = x * weight + bias, weight is fan_in x fan_out.
struct Dense {
  Matrix weight;
  std::vector<double> bias;
  friend bool operator==(const Dense&, const Dense&) = default;
};

/// Encoder and decoder weights, in declaration order:
///   encoder trunk..., encoder mean head, encoder log-variance head,
///   decoder trunk..., decoder output head, [decoder log-variance head].
/// The decoder log-variance head exists for the gaussian family only.
class Params {
 public:
  Params() = default;
  /// All-zero parameters shaped for arch.
  explicit Params(const Architecture& arch);

  const Architecture& arch() const noexcept { return arch_; }
  std::vector<Dense>& layers() noexcept { return layers_; }
  const std::vector<Dense>& layers() const noexcept { return layers_; }

  std::size_t encoder_depth() const noexcept { return arch_.encoder_hidden.size(); }
  std::size_t decoder_depth() const noexcept { return arch_.decoder_hidden.size(); }

  std::size_t enc_mean_index() const noexcept { return encoder_depth(); }
  std::size_t enc_logvar_index() const noexcept { return encoder_depth() + 1; }
  std::size_t dec_trunk_index(std::size_t i) const noexcept { return encoder_depth() + 2 + i; }
  std::size_t dec_out_index() const noexcept { return encoder_depth() + 2 + decoder_depth(); }
  std::size_t dec_logvar_index() const noexcept { return dec_out_index() + 1; }

  Dense& layer(std::size_t i) { return layers_.at(i); }
  const Dense& layer(std::size_t i) const { return layers_.at(i); }

  std::size_t num_parameters() const noexcept;
  /// Every weight matrix and bias vector as a flat span, declaration order
  /// (weight before bias within a layer).
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  double& scalar(std::size_t flat_index);
  double scalar(std::size_t flat_index) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Params&, const Params&) = default;

 private:
  Architecture arch_;
  std::vector<Dense> layers_;
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)); zero biases.
Params init_params(const Architecture& arch, Rng& rng);

/// q(z | x_tilde) per row.
struct GaussianParams {
  Matrix mu;
  Matrix logvar;  ///< clamped to [kLogVarMin, kLogVarMax]
};

/// Likelihood parameters of p(x | z) per row. For bernoulli, mean holds the
/// success probabilities and logvar is empty.
struct DecoderOutput {
  Matrix mean;
  Matrix logvar;
};

struct EncoderCache {
  std::vector<Matrix> activations;  ///< activations[0] is the input
  std::vector<Matrix> pre;          ///< pre-activations of each trunk layer
  Matrix logvar_pre;                ///< log-variance head before clamping
};

struct DecoderCache {
  std::vector<Matrix> activations;  ///< activations[0] is z
  std::vector<Matrix> pre;
  Matrix out_pre;     ///< output head pre-activation (logits or mean logits)
  Matrix logvar_pre;  ///< gaussian family only
};

GaussianParams encode(const Params& params, const Matrix& x_tilde, EncoderCache* cache = nullptr);
DecoderOutput decode(const Params& params, const Matrix& z, DecoderCache* cache = nullptr);

/// z = mu + exp(0.5 logvar) * eps, all matrices the same shape.
Matrix reparam_sample(const GaussianParams& g, const Matrix& eps);

/// log p(x_r | decoder row r) for every row r.
std::vector<double> output_loglik(OutputFamily family, const DecoderOutput& out, const Matrix& targets);

/// Random inputs of one minibatch update. For datum b, corrupted copy m and
/// latent draw k:
///   x_tilde row  b*M + m,
///   eps row      (b*M + m)*K + k.
struct Draws {
  std::size_t M = 1;
  std::size_t K = 1;
  Matrix x_tilde;
  Matrix eps;
};

/// Objective value of every datum plus the raw log importance ratios
/// log p(x, z) - log q(z | x_tilde), one row per datum, M*K columns.
struct ObjectiveValue {
  std::vector<double> per_example;
  Matrix log_weights;
};

/// Forward pass of the selected Monte Carlo objective on fixed draws.
/// The reconstruction target is always the clean x.
ObjectiveValue evaluate_objective(const Params& params, const Matrix& x, const Draws& draws,
                                  const EstimatorConfig& est);

struct Gradient {
  Params grad;           ///< d(loss)/d(params), loss = -mean objective over the batch
  ObjectiveValue value;
};

/// Exact pathwise gradient of the minimized loss  -(1/B) sum_b objective_b,
/// holding draws fixed. Throws NumericError with the layer index on a
/// non-finite intermediate.
Gradient backward(const Params& params, const Matrix& x, const Draws& draws, const EstimatorConfig& est);

/// Checkpoint: little-endian "DVAE", u32 version, architecture descriptor,
/// then every tensor in declaration order as f64.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void write_checkpoint(std::ostream& os, const Params& params);
Params read_checkpoint(std::istream& is);
void save_checkpoint(const std::string& path, const Params& params);
Params load_checkpoint(const std::string& path);

}  // namespace dvae
