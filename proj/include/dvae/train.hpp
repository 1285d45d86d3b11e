#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dvae/config.hpp"
#include "dvae/data.hpp"
#include "dvae/model.hpp"
#include "dvae/objectives.hpp"

namespace dvae {

/// One line of the metrics CSV.
struct MetricsRow {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::string split;  ///< train | val | test
  Objective objective = Objective::vae;
  double neg_bound = 0.0;  ///< nats per example, lower is better
  double std_err = 0.0;
  double wallclock_s = 0.0;
};

inline constexpr const char* kMetricsHeader = "seed,epoch,split,objective,neg_bound,std_err,wallclock_s";
std::string format_metrics_row(const MetricsRow& row);
std::string metrics_csv(std::span<const MetricsRow> rows);

/// Mean negative bound per example over `data`, in minibatches of 100.
/// Corrupted copies and latent noise come from substreams of `seed` only, so
/// the result is bit-identical across calls.
BoundEstimate evaluate(const Params& params, const Matrix& data, const EstimatorConfig& est,
                       const CorruptionSpec& corruption, std::uint64_t seed);

/// Estimators used for the per-epoch validation bound and the reported test
/// bound: corruption stays active for dvae/diwae, with eval.val_M / eval.M
/// copies; vae/iwae use a single clean copy.
EstimatorConfig validation_estimator(const RunConfig& cfg);
EstimatorConfig test_estimator(const RunConfig& cfg);

/// Fills mean_image rates from the training split; other kinds pass through.
CorruptionSpec resolve_corruption(const CorruptionSpec& spec, const Dataset& ds);

Dataset load_dataset(const RunConfig& cfg);

struct RunResult {
  std::uint64_t seed = 0;
  Params best_params;  ///< parameters at the best validation epoch
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  BoundEstimate test;
  std::vector<MetricsRow> metrics;
  std::size_t updates = 0;
  bool diverged = false;
  std::string error;
};

using MetricsCallback = std::function<void(const MetricsRow&)>;

/// Trains one seed. Per epoch: shuffle with the "minibatch" substream, then
/// per minibatch draw corruptions ("corrupt") and latent noise ("eps"), take
/// the objective gradient and one Adam step; then log the validation bound.
/// A non-finite bound stops training and keeps the best checkpoint so far.
RunResult train(const RunConfig& cfg, const Dataset& ds, std::uint64_t seed, const MetricsCallback& on_row = {});

/// Runs cfg.lr_grid on the first seed and returns the rate with the best
/// validation bound (adam.lr when the grid is empty).
double choose_learning_rate(const RunConfig& cfg, const Dataset& ds);

struct GridCell {
  Objective objective = Objective::dvae;
  double level_percent = 0.0;
  std::size_t M = 1;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  BoundEstimate test;
  std::size_t best_epoch = 0;
};

struct GridSummary {
  Objective objective = Objective::dvae;
  std::size_t M = 1;
  double level_percent = 0.0;
  double mean = 0.0;
  double std = 0.0;  ///< sample std over seeds
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  bool best_in_row = false;  ///< lowest mean negative bound of its (objective, M) row; ties all marked
};

struct GridResult {
  std::vector<GridCell> cells;
  std::vector<GridSummary> summary;
};

struct GridAxes {
  std::vector<double> levels_percent;
  std::vector<Objective> objectives;
  std::vector<std::size_t> Ms;
  std::vector<std::uint64_t> seeds;
};

/// Trains every (objective, M, level, seed) cell. A failing cell is recorded
/// and the grid continues. Cells run on cfg.grid_workers threads.
GridResult run_grid(const RunConfig& base, const Dataset& ds, const GridAxes& axes,
                    const std::function<void(const GridCell&)>& on_cell = {});

GridSummary summarize_cells(std::span<const GridCell> cells);
void mark_best(std::vector<GridSummary>& summary);
std::string grid_cells_csv(const GridResult& g);
std::string grid_summary_csv(const GridResult& g);
std::string grid_text_table(const GridResult& g);

}  // namespace dvae
