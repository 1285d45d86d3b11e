#include "dvae/config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "dvae/error.hpp"

namespace dvae {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(d))
    throw ConfigError(key, "expected a number, got '" + v + "'");
  return d;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) { return static_cast<std::size_t>(to_u64(key, v)); }

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(key, "expected true/false, got '" + v + "'");
}

std::string fmt_double(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += f(v[i]);
  }
  return out;
}

}  // namespace

ConfigMap ConfigMap::parse(std::string_view text) {
  ConfigMap cfg;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError("", "line " + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = trim(std::string_view(line).substr(eq + 1));
  }
  return cfg;
}

ConfigMap ConfigMap::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("--config", "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema{
      {"dataset.name", "mnist", "mnist | frey"},
      {"dataset.path", "", "MNIST directory with the IDX files, or the FREY v1 file (required)"},
      {"dataset.seed", "0", "seed of the static MNIST binarization"},
      {"dataset.train_subset", "10000", "training rows used (0 = all); ignored with dataset.full_scale"},
      {"dataset.full_scale", "false", "use the full 50000-image MNIST training split"},
      {"model.encoder_layers", "1", "encoder hidden layers (1 or 2)"},
      {"model.decoder_layers", "2", "decoder hidden layers (1 or 2)"},
      {"model.hidden", "200", "units per hidden layer"},
      {"model.latent_dim", "50", "latent dimension"},
      {"model.activation", "auto", "softplus | tanh | auto (softplus for vae/dvae, tanh for iwae/diwae)"},
      {"model.output", "auto", "bernoulli | gaussian | auto (by dataset)"},
      {"objective", "dvae", "vae | dvae | iwae | diwae"},
      {"samples.M", "1", "corrupted copies per example"},
      {"samples.K", "1", "latent samples per corrupted copy"},
      {"analytic_kl", "false", "closed-form KL term (objective vae only)"},
      {"corruption.kind", "auto", "none | salt_pepper | gaussian | mean_image | auto (salt_pepper for mnist, gaussian for frey)"},
      {"corruption.level", "0", "salt-and-pepper rate or Gaussian sigma (noise level percent / 100)"},
      {"optim.lr", "0.001", "Adam step size"},
      {"optim.beta1", "0.9", "Adam first-moment decay"},
      {"optim.beta2", "0.999", "Adam second-moment decay"},
      {"optim.eps", "1e-8", "Adam epsilon"},
      {"optim.batch_size", "100", "minibatch size"},
      {"optim.lr_grid", "", "comma-separated rates; picks the best validation rate on the first seed"},
      {"train.epochs", "30", "epochs per run"},
      {"train.seeds", "0,1,2,3,4", "comma-separated run seeds"},
      {"train.augment", "false", "resample the binarization every minibatch and reconstruct the resample"},
      {"train.threads", "1", "threads for the dense kernels (results do not depend on it)"},
      {"eval.M", "5", "corrupted copies for reported dvae/diwae test bounds"},
      {"eval.K", "0", "latent samples for evaluation (0 = samples.K)"},
      {"eval.val_M", "1", "corrupted copies for the per-epoch validation bound"},
      {"grid.levels", "0,5,10,15", "noise levels in percent (grid only)"},
      {"grid.objectives", "", "objectives to grid over (default: objective)"},
      {"grid.M", "", "values of samples.M to grid over (default: samples.M)"},
      {"grid.workers", "1", "grid cells trained concurrently"},
      {"out.dir", "", "output directory (metrics, checkpoints, tables)"},
  };
  return schema;
}

std::string config_help() {
  std::string out = "Config keys (key=value lines, '#' comments; flags override the file):\n";
  for (const auto& k : config_schema()) {
    std::string line = "  " + std::string(k.key);
    line.resize(std::max<std::size_t>(line.size() + 1, 26), ' ');
    out += line + std::string(k.doc) + " [default: " + std::string(k.default_value) + "]\n";
  }
  return out;
}

CorruptionSpec RunConfig::corruption_at(double level) const {
  CorruptionSpec spec = corruption;
  spec.level = level;
  if (corruption_auto)
    spec.kind = level == 0.0 ? CorruptionKind::none
                               : (dataset == "frey" ? CorruptionKind::gaussian : CorruptionKind::salt_pepper);
  return spec;
}

void RunConfig::validate() const {
  if (dataset != "mnist" && dataset != "frey") throw ConfigError("dataset.name", "must be mnist or frey");
  if (dataset_path.empty()) throw ConfigError("dataset.path", "missing required key");
  arch.validate();
  estimator.validate();
  corruption.validate();
  if (corruption.kind != CorruptionKind::none && corruption.kind != CorruptionKind::mean_image)
    corruption.validate_for(dataset == "mnist" ? Modality::binary : Modality::real);
  if (corruption.kind == CorruptionKind::mean_image && dataset != "mnist")
    throw ConfigError("corruption.kind", "mean_image needs binary data");
  if (epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
  if (seeds.empty()) throw ConfigError("train.seeds", "need at least one seed");
  if (batch_size < 1) throw ConfigError("optim.batch_size", "must be >= 1");
  if (adam.lr < 0.0) throw ConfigError("optim.lr", "must be >= 0");
  if (eval.M < 1) throw ConfigError("eval.M", "must be >= 1");
  if (eval.val_M < 1) throw ConfigError("eval.val_M", "must be >= 1");
  if (augment && dataset != "mnist") throw ConfigError("train.augment", "augmentation resamples binarized MNIST only");
  if (threads < 1) throw ConfigError("train.threads", "must be >= 1");
  if (grid_workers < 1) throw ConfigError("grid.workers", "must be >= 1");
}

RunConfig make_run_config(const ConfigMap& cfg) {
  std::set<std::string> known;
  for (const auto& k : config_schema()) known.insert(std::string(k.key));
  for (const auto& [k, v] : cfg.values())
    if (!known.count(k)) throw ConfigError(k, "unknown config key");

  auto get = [&](const std::string& key) -> std::string {
    if (auto it = cfg.values().find(key); it != cfg.values().end()) return it->second;
    for (const auto& k : config_schema())
      if (k.key == key) return std::string(k.default_value);
    throw ConfigError(key, "internal: key missing from schema");
  };

  RunConfig rc;
  rc.dataset = get("dataset.name");
  rc.dataset_path = get("dataset.path");
  rc.data_seed = to_u64("dataset.seed", get("dataset.seed"));
  rc.full_scale = to_bool("dataset.full_scale", get("dataset.full_scale"));
  rc.train_subset = rc.full_scale ? 0 : to_size("dataset.train_subset", get("dataset.train_subset"));

  rc.estimator.objective = parse_objective(get("objective"));
  rc.estimator.M = to_size("samples.M", get("samples.M"));
  rc.estimator.K = to_size("samples.K", get("samples.K"));
  rc.estimator.analytic_kl = to_bool("analytic_kl", get("analytic_kl"));

  const std::size_t hidden = to_size("model.hidden", get("model.hidden"));
  rc.arch.input_dim = rc.dataset == "frey" ? 560 : 784;
  rc.arch.latent_dim = to_size("model.latent_dim", get("model.latent_dim"));
  rc.arch.encoder_hidden.assign(to_size("model.encoder_layers", get("model.encoder_layers")), hidden);
  rc.arch.decoder_hidden.assign(to_size("model.decoder_layers", get("model.decoder_layers")), hidden);
  const std::string act = get("model.activation");
  rc.arch.activation = act == "auto" ? (rc.estimator.importance_weighted() ? Activation::tanh : Activation::softplus)
                                     : parse_activation(act);
  const std::string out = get("model.output");
  rc.arch.output = out == "auto" ? (rc.dataset == "frey" ? OutputFamily::gaussian : OutputFamily::bernoulli)
                                 : parse_output_family(out);

  const double level = to_double("corruption.level", get("corruption.level"));
  const std::string kind = get("corruption.kind");
  rc.corruption.level = level;
  rc.noise_level_percent = level * 100.0;
  rc.corruption_auto = kind == "auto";
  if (!rc.corruption_auto) rc.corruption.kind = parse_corruption_kind(kind);
  rc.corruption = rc.corruption_at(level);

  rc.adam.lr = to_double("optim.lr", get("optim.lr"));
  rc.adam.beta1 = to_double("optim.beta1", get("optim.beta1"));
  rc.adam.beta2 = to_double("optim.beta2", get("optim.beta2"));
  rc.adam.eps = to_double("optim.eps", get("optim.eps"));
  rc.batch_size = to_size("optim.batch_size", get("optim.batch_size"));
  for (const auto& s : split_list(get("optim.lr_grid"))) rc.lr_grid.push_back(to_double("optim.lr_grid", s));

  rc.epochs = to_size("train.epochs", get("train.epochs"));
  rc.seeds.clear();
  for (const auto& s : split_list(get("train.seeds"))) rc.seeds.push_back(to_u64("train.seeds", s));
  rc.augment = to_bool("train.augment", get("train.augment"));
  rc.threads = static_cast<int>(to_size("train.threads", get("train.threads")));

  rc.eval.M = to_size("eval.M", get("eval.M"));
  rc.eval.K = to_size("eval.K", get("eval.K"));
  rc.eval.val_M = to_size("eval.val_M", get("eval.val_M"));

  for (const auto& s : split_list(get("grid.levels"))) rc.grid_levels.push_back(to_double("grid.levels", s));
  for (const auto& s : split_list(get("grid.objectives"))) rc.grid_objectives.push_back(parse_objective(s));
  if (rc.grid_objectives.empty()) rc.grid_objectives.push_back(rc.estimator.objective);
  for (const auto& s : split_list(get("grid.M"))) rc.grid_M.push_back(to_size("grid.M", s));
  if (rc.grid_M.empty()) rc.grid_M.push_back(rc.estimator.M);
  rc.grid_workers = static_cast<int>(to_size("grid.workers", get("grid.workers")));

  rc.out_dir = get("out.dir");
  return rc;
}

std::string format_run_config(const RunConfig& rc) {
  std::string o;
  auto line = [&](const std::string& k, const std::string& v) { o += k + "=" + v + "\n"; };
  line("dataset.name", rc.dataset);
  line("dataset.path", rc.dataset_path);
  line("dataset.seed", std::to_string(rc.data_seed));
  line("dataset.train_subset", std::to_string(rc.train_subset));
  line("dataset.full_scale", rc.full_scale ? "true" : "false");
  line("model.encoder_layers", std::to_string(rc.arch.encoder_hidden.size()));
  line("model.decoder_layers", std::to_string(rc.arch.decoder_hidden.size()));
  line("model.hidden", std::to_string(rc.arch.encoder_hidden.empty() ? 0 : rc.arch.encoder_hidden[0]));
  line("model.latent_dim", std::to_string(rc.arch.latent_dim));
  line("model.activation", std::string(to_string(rc.arch.activation)));
  line("model.output", std::string(to_string(rc.arch.output)));
  line("objective", std::string(to_string(rc.estimator.objective)));
  line("samples.M", std::to_string(rc.estimator.M));
  line("samples.K", std::to_string(rc.estimator.K));
  line("analytic_kl", rc.estimator.analytic_kl ? "true" : "false");
  line("corruption.kind", rc.corruption_auto ? "auto" : std::string(to_string(rc.corruption.kind)));
  line("corruption.level", fmt_double(rc.corruption.level));
  line("optim.lr", fmt_double(rc.adam.lr));
  line("optim.beta1", fmt_double(rc.adam.beta1));
  line("optim.beta2", fmt_double(rc.adam.beta2));
  line("optim.eps", fmt_double(rc.adam.eps));
  line("optim.batch_size", std::to_string(rc.batch_size));
  line("optim.lr_grid", join(rc.lr_grid, fmt_double));
  line("train.epochs", std::to_string(rc.epochs));
  line("train.seeds", join(rc.seeds, [](std::uint64_t s) { return std::to_string(s); }));
  line("train.augment", rc.augment ? "true" : "false");
  line("train.threads", std::to_string(rc.threads));
  line("eval.M", std::to_string(rc.eval.M));
  line("eval.K", std::to_string(rc.eval.K));
  line("eval.val_M", std::to_string(rc.eval.val_M));
  line("grid.levels", join(rc.grid_levels, fmt_double));
  line("grid.objectives", join(rc.grid_objectives, [](Objective x) { return std::string(to_string(x)); }));
  line("grid.M", join(rc.grid_M, [](std::size_t m) { return std::to_string(m); }));
  line("grid.workers", std::to_string(rc.grid_workers));
  line("out.dir", rc.out_dir);
  return o;
}

}  // namespace dvae
