#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dvae/corruption.hpp"
#include "dvae/estimator.hpp"
#include "dvae/model.hpp"
#include "dvae/optim.hpp"

namespace dvae {

/// Flat key=value configuration; '#' starts a comment. Later assignments of
/// the same key win, so command-line overrides are applied by set().
class ConfigMap {
 public:
  static ConfigMap parse(std::string_view text);
  static ConfigMap load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct ConfigKey {
  std::string_view key;
  std::string_view default_value;
  std::string_view doc;
};

/// Every accepted key, in documentation order.
const std::vector<ConfigKey>& config_schema();
std::string config_help();

struct EvalSettings {
  std::size_t M = 5;       ///< corrupted copies for reported (test) bounds
  std::size_t K = 0;       ///< latent draws; 0 means "same as training K"
  std::size_t val_M = 1;   ///< corrupted copies for per-epoch validation
};

struct RunConfig {
  std::string dataset = "mnist";
  std::string dataset_path;
  std::uint64_t data_seed = 0;  ///< static binarization seed
  std::size_t train_subset = 0;
  bool full_scale = false;

  Architecture arch;
  EstimatorConfig estimator;
  CorruptionSpec corruption;
  double noise_level_percent = 0.0;  ///< noise level as tabulated; level = percent / 100
  bool corruption_auto = true;       ///< kind picked from the dataset and level

  AdamConfig adam;
  std::vector<double> lr_grid;  ///< empty: use adam.lr as is
  std::size_t batch_size = 100;
  std::size_t epochs = 30;
  std::vector<std::uint64_t> seeds{0};
  bool augment = false;
  EvalSettings eval;
  std::string out_dir;
  int threads = 1;
  int grid_workers = 1;

  // Grid axes (grid subcommand only).
  std::vector<double> grid_levels;
  std::vector<Objective> grid_objectives;
  std::vector<std::size_t> grid_M;

  /// Corruption with the given level, kind following corruption_auto.
  CorruptionSpec corruption_at(double level) const;

  void validate() const;
};

/// Typed conversion of a ConfigMap. Unknown keys and malformed values throw
/// ConfigError naming the key. Architecture input size and output family are
/// filled in from the dataset.
RunConfig make_run_config(const ConfigMap& cfg);

/// Renders a run config back into key=value lines (recorded next to outputs).
std::string format_run_config(const RunConfig& cfg);

}  // namespace dvae
