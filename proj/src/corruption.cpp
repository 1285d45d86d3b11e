#include "dvae/corruption.hpp"

#include <cmath>

#include "dvae/error.hpp"

namespace dvae {

namespace {

constexpr std::size_t kMaxEnumDim = 20;

bool is_binary(double v) noexcept { return v == 0.0 || v == 1.0; }

void require_binary(std::span<const double> x, const char* what) {
  for (double v : x)
    if (!is_binary(v)) throw ConfigError("corruption.kind", std::string(what) + " requires binary input");
}

void require_enumerable(const CorruptionSpec& spec, std::size_t dim) {
  if (!spec.is_discrete())
    throw UnsupportedError("corruption pmf is only defined for salt_pepper and mean_image");
  if (dim > kMaxEnumDim) throw UnsupportedError("corruption pmf: dimension too large to enumerate");
  if (spec.kind == CorruptionKind::mean_image && spec.rates.size() != dim)
    throw ShapeError("corruption: rates length does not match input dimension");
}

}  // namespace

std::string_view to_string(CorruptionKind k) noexcept {
  switch (k) {
    case CorruptionKind::none: return "none";
    case CorruptionKind::salt_pepper: return "salt_pepper";
    case CorruptionKind::gaussian: return "gaussian";
    case CorruptionKind::mean_image: return "mean_image";
  }
  return "none";
}

CorruptionKind parse_corruption_kind(std::string_view s) {
  if (s == "none") return CorruptionKind::none;
  if (s == "salt_pepper" || s == "salt-pepper") return CorruptionKind::salt_pepper;
  if (s == "gaussian") return CorruptionKind::gaussian;
  if (s == "mean_image" || s == "mean-image") return CorruptionKind::mean_image;
  throw ConfigError("corruption.kind", "unknown corruption kind '" + std::string(s) + "'");
}

void CorruptionSpec::validate() const {
  if (!(level >= 0.0) || !std::isfinite(level)) throw ConfigError("corruption.level", "must be >= 0");
  if (kind == CorruptionKind::salt_pepper && level > 1.0)
    throw ConfigError("corruption.level", "salt_pepper rate must be <= 1");
  if (kind == CorruptionKind::mean_image) {
    if (rates.empty()) throw ConfigError("corruption.kind", "mean_image needs per-pixel rates");
    for (double r : rates)
      if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("corruption.kind", "mean_image rates must lie in [0, 1]");
  }
}

void CorruptionSpec::validate_for(Modality modality) const {
  validate();
  if (modality == Modality::real && is_discrete())
    throw ConfigError("corruption.kind", std::string(to_string(kind)) + " needs binary data");
  if (modality == Modality::binary && kind == CorruptionKind::gaussian)
    throw ConfigError("corruption.kind", "gaussian corruption needs real-valued data");
}

void corrupt_into(const CorruptionSpec& spec, std::span<const double> x, std::span<double> out, Rng& rng) {
  if (out.size() != x.size()) throw ShapeError("corrupt: output length mismatch");
  switch (spec.kind) {
    case CorruptionKind::none:
      std::copy(x.begin(), x.end(), out.begin());
      return;
    case CorruptionKind::gaussian:
      for (std::size_t d = 0; d < x.size(); ++d) out[d] = x[d] + spec.level * rng.normal();
      return;
    case CorruptionKind::salt_pepper:
    case CorruptionKind::mean_image: {
      if (spec.kind == CorruptionKind::mean_image && spec.rates.size() != x.size())
        throw ShapeError("corrupt: rates length does not match input dimension");
      require_binary(x, to_string(spec.kind).data());
      // u < r/2 -> 0, r/2 <= u < r -> 1, otherwise keep.
      for (std::size_t d = 0; d < x.size(); ++d) {
        const double r = spec.rate(d);
        const double u = rng.uniform();
        out[d] = u < 0.5 * r ? 0.0 : (u < r ? 1.0 : x[d]);
      }
      return;
    }
  }
}

std::vector<double> corrupt(const CorruptionSpec& spec, std::span<const double> x, Rng& rng) {
  std::vector<double> out(x.size());
  corrupt_into(spec, x, out, rng);
  return out;
}

double corruption_pmf(const CorruptionSpec& spec, std::span<const double> x_tilde, std::span<const double> x) {
  if (x_tilde.size() != x.size()) throw ShapeError("corruption_pmf: dimension mismatch");
  require_enumerable(spec, x.size());
  require_binary(x, "corruption_pmf");
  require_binary(x_tilde, "corruption_pmf");
  double p = 1.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double half = 0.5 * spec.rate(d);
    p *= x_tilde[d] == x[d] ? 1.0 - half : half;
  }
  return p;
}

std::vector<CorruptionOutcome> enumerate_corruptions(const CorruptionSpec& spec, std::span<const double> x) {
  require_enumerable(spec, x.size());
  require_binary(x, "enumerate_corruptions");
  const std::size_t dim = x.size();
  std::vector<CorruptionOutcome> out;
  std::vector<double> xt(dim);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << dim); ++mask) {
    // Bit d of mask set means pixel d differs from x.
    double p = 1.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const bool flip = (mask >> d) & 1U;
      const double half = 0.5 * spec.rate(d);
      p *= flip ? half : 1.0 - half;
      xt[d] = flip ? 1.0 - x[d] : x[d];
    }
    if (p > 0.0) out.push_back({xt, p});
  }
  return out;
}

std::vector<double> mean_image_rates(const Matrix& dataset) {
  if (dataset.rows() == 0) throw Error("mean_image_rates: empty dataset");
  std::vector<double> rates(dataset.cols(), 0.0);
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    auto row = dataset.row(i);
    for (std::size_t d = 0; d < rates.size(); ++d) rates[d] += row[d];
  }
  for (double& r : rates) r /= static_cast<double>(dataset.rows());
  return rates;
}

}  // namespace dvae
