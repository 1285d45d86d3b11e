#include "dvae/train.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "dvae/error.hpp"
#include "dvae/kernels.hpp"
#include "dvae/math.hpp"
#include "dvae/optim.hpp"

namespace dvae {

namespace {

constexpr std::size_t kEvalBatch = 100;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) { return Rng(seed).substream(name).next_u64(); }

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

std::string format_metrics_row(const MetricsRow& r) {
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", r.wallclock_s);
  return std::to_string(r.seed) + "," + std::to_string(r.epoch) + "," + r.split + "," +
         std::string(to_string(r.objective)) + "," + fmt17(r.neg_bound) + "," + fmt17(r.std_err) + "," + wall;
}

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : rows) out += format_metrics_row(r) + "\n";
  return out;
}

BoundEstimate evaluate(const Params& params, const Matrix& data, const EstimatorConfig& est,
                       const CorruptionSpec& corruption, std::uint64_t seed) {
  if (data.cols() != params.arch().input_dim) throw ShapeError("evaluate: data width does not match the model");
  if (data.rows() == 0) throw ShapeError("evaluate: empty split");
  const Rng root(seed);
  Rng corrupt_rng = root.substream("eval-corrupt");
  Rng eps_rng = root.substream("eval-eps");
  std::vector<double> neg(data.rows());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.rows(); start += kEvalBatch) {
    const std::size_t n = std::min(kEvalBatch, data.rows() - start);
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), start);
    const Matrix x = gather_rows(data, idx);
    const Draws d = sample_draws(x, corruption, est, params.arch().latent_dim, corrupt_rng, eps_rng);
    const auto v = evaluate_objective(params, x, d, est);
    for (std::size_t i = 0; i < n; ++i) neg[start + i] = -v.per_example[i];
  }
  const auto ms = math::mean_std(neg);
  return {ms.mean, ms.std / std::sqrt(static_cast<double>(neg.size())), neg.size()};
}

EstimatorConfig validation_estimator(const RunConfig& cfg) {
  EstimatorConfig e = cfg.estimator;
  e.M = e.uses_corruption() ? cfg.eval.val_M : 1;
  if (cfg.eval.K) e.K = cfg.eval.K;
  return e;
}

EstimatorConfig test_estimator(const RunConfig& cfg) {
  EstimatorConfig e = cfg.estimator;
  e.M = e.uses_corruption() ? cfg.eval.M : 1;
  if (cfg.eval.K) e.K = cfg.eval.K;
  return e;
}

CorruptionSpec resolve_corruption(const CorruptionSpec& spec, const Dataset& ds) {
  if (spec.kind != CorruptionKind::mean_image || !spec.rates.empty()) return spec;
  CorruptionSpec out = spec;
  out.rates = mean_image_rates(ds.train);
  return out;
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.dataset == "frey") return load_frey(cfg.dataset_path);
  MnistOptions opts;
  opts.seed = cfg.data_seed;
  opts.train_subset = cfg.full_scale ? 0 : cfg.train_subset;
  return load_mnist(cfg.dataset_path, opts);
}

RunResult train(const RunConfig& cfg, const Dataset& ds, std::uint64_t seed, const MetricsCallback& on_row) {
  cfg.estimator.validate();
  if (cfg.epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
  if (ds.train.cols() != cfg.arch.input_dim) throw ShapeError("train: dataset width does not match the model");
  if (cfg.augment && !ds.train_raw) throw ConfigError("train.augment", "dataset has no raw images to resample");

  const Stopwatch clock;
  const Rng root(seed);
  Rng init_rng = root.substream("init");
  Rng corrupt_rng = root.substream("corrupt");
  Rng eps_rng = root.substream("eps");
  Rng batch_rng = root.substream("minibatch");
  Rng resample_rng = root.substream("binarize");
  const std::uint64_t val_seed = derive_seed(seed, "eval-val");
  const std::uint64_t test_seed = derive_seed(seed, "eval-test");

  const CorruptionSpec corruption = resolve_corruption(cfg.corruption, ds);
  // Augmentation reconstructs the resampled input itself, so nothing is corrupted.
  const CorruptionSpec train_corruption = cfg.augment ? CorruptionSpec::none() : corruption;
  const EstimatorConfig val_est = validation_estimator(cfg);

  RunResult res;
  res.seed = seed;
  Params params = init_params(cfg.arch, init_rng);
  res.best_params = params;
  res.best_val = std::numeric_limits<double>::infinity();
  AdamState adam(cfg.adam);

  auto emit = [&](MetricsRow row) {
    row.wallclock_s = clock.seconds();
    res.metrics.push_back(row);
    if (on_row) on_row(row);
  };

  std::vector<std::size_t> order(ds.train.rows());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> epoch_neg;
  epoch_neg.reserve(order.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), batch_rng);
    epoch_neg.clear();
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t n = std::min(cfg.batch_size, order.size() - start);
        std::span<const std::size_t> idx(order.data() + start, n);
        const Matrix x = cfg.augment ? resample_binarize(*ds.train_raw, idx, resample_rng) : gather_rows(ds.train, idx);
        const Draws d = sample_draws(x, train_corruption, cfg.estimator, cfg.arch.latent_dim, corrupt_rng, eps_rng);
        const Gradient g = backward(params, x, d, cfg.estimator);
        for (double v : g.value.per_example) epoch_neg.push_back(-v);
        adam_step(adam, params, g.grad);
        ++res.updates;
      }
      const auto tr = math::mean_std(epoch_neg);
      emit({seed, epoch, "train", cfg.estimator.objective, tr.mean,
            tr.std / std::sqrt(static_cast<double>(epoch_neg.size())), 0.0});

      const BoundEstimate val = evaluate(params, ds.val, val_est, corruption, val_seed);
      if (!std::isfinite(val.value)) throw NumericError("non-finite validation bound");
      emit({seed, epoch, "val", cfg.estimator.objective, val.value, val.std_error, 0.0});
      if (val.value < res.best_val) {
        res.best_val = val.value;
        res.best_epoch = epoch;
        res.best_params = params;
      }
    } catch (const NumericError& e) {
      res.diverged = true;
      res.error = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
  }

  if (res.best_epoch > 0) {
    res.test = evaluate(res.best_params, ds.test, test_estimator(cfg), corruption, test_seed);
    emit({seed, res.best_epoch, "test", cfg.estimator.objective, res.test.value, res.test.std_error, 0.0});
  }
  return res;
}

double choose_learning_rate(const RunConfig& cfg, const Dataset& ds) {
  if (cfg.lr_grid.size() <= 1) return cfg.lr_grid.empty() ? cfg.adam.lr : cfg.lr_grid.front();
  std::vector<LrTrial> trials;
  for (double lr : cfg.lr_grid) {
    RunConfig c = cfg;
    c.adam.lr = lr;
    const RunResult r = train(c, ds, cfg.seeds.front());
    trials.push_back({lr, r.best_epoch > 0 ? r.best_val : std::numeric_limits<double>::quiet_NaN()});
  }
  return select_lr(trials);
}

GridSummary summarize_cells(std::span<const GridCell> cells) {
  GridSummary s;
  if (cells.empty()) throw Error("summarize_cells: no cells");
  s.objective = cells.front().objective;
  s.M = cells.front().M;
  s.level_percent = cells.front().level_percent;
  std::vector<double> v;
  for (const auto& c : cells) {
    if (c.ok)
      v.push_back(c.test.value);
    else
      ++s.n_failed;
  }
  s.n_ok = v.size();
  const auto ms = math::mean_std(v);
  s.mean = v.empty() ? std::numeric_limits<double>::quiet_NaN() : ms.mean;
  s.std = ms.std;
  return s;
}

void mark_best(std::vector<GridSummary>& summary) {
  std::map<std::pair<int, std::size_t>, double> best;
  for (const auto& s : summary) {
    if (s.n_ok == 0) continue;
    auto key = std::make_pair(static_cast<int>(s.objective), s.M);
    auto it = best.find(key);
    if (it == best.end() || s.mean < it->second) best[key] = s.mean;
  }
  for (auto& s : summary) {
    auto it = best.find({static_cast<int>(s.objective), s.M});
    s.best_in_row = s.n_ok > 0 && it != best.end() && s.mean == it->second;
  }
}

GridResult run_grid(const RunConfig& base, const Dataset& ds, const GridAxes& axes,
                    const std::function<void(const GridCell&)>& on_cell) {
  if (axes.levels_percent.empty() || axes.objectives.empty() || axes.Ms.empty() || axes.seeds.empty())
    throw ConfigError("grid", "every grid axis needs at least one value");

  GridResult g;
  for (Objective o : axes.objectives)
    for (std::size_t m : axes.Ms)
      for (double lvl : axes.levels_percent)
        for (std::uint64_t s : axes.seeds) g.cells.push_back({o, lvl, m, s, false, {}, {}, 0});

  const auto n = static_cast<std::ptrdiff_t>(g.cells.size());
  const int saved_threads = kernels::num_threads();
  // Parallel cells each run their kernels single-threaded.
  if (base.grid_workers > 1) kernels::set_num_threads(1);
#pragma omp parallel for schedule(dynamic, 1) num_threads(base.grid_workers) if (base.grid_workers > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    GridCell& c = g.cells[static_cast<std::size_t>(i)];
    try {
      RunConfig cfg = base;
      cfg.estimator.objective = c.objective;
      cfg.estimator.M = c.M;
      cfg.corruption = base.corruption_at(c.level_percent / 100.0);
      cfg.noise_level_percent = c.level_percent;
      cfg.validate();
      const RunResult r = train(cfg, ds, c.seed);
      c.ok = r.best_epoch > 0;
      c.test = r.test;
      c.best_epoch = r.best_epoch;
      if (!c.ok) c.error = r.error.empty() ? "no completed epoch" : r.error;
    } catch (const std::exception& e) {
      c.ok = false;
      c.error = e.what();
    }
    if (on_cell) {
#pragma omp critical(dvae_grid_progress)
      on_cell(c);
    }
  }
  if (base.grid_workers > 1) kernels::set_num_threads(saved_threads);

  for (std::size_t i = 0; i < g.cells.size(); i += axes.seeds.size())
    g.summary.push_back(summarize_cells(std::span<const GridCell>(g.cells.data() + i, axes.seeds.size())));
  mark_best(g.summary);
  return g;
}

std::string grid_cells_csv(const GridResult& g) {
  std::string out = "objective,M,noise_level,seed,status,test_neg_bound,test_std_err,best_epoch\n";
  for (const auto& c : g.cells) {
    out += std::string(to_string(c.objective)) + "," + std::to_string(c.M) + "," + fmt17(c.level_percent) + "," +
           std::to_string(c.seed) + "," + (c.ok ? "ok" : "failed") + "," + fmt17(c.test.value) + "," +
           fmt17(c.test.std_error) + "," + std::to_string(c.best_epoch) + "\n";
  }
  return out;
}

std::string grid_summary_csv(const GridResult& g) {
  std::string out = "objective,M,noise_level,mean_neg_bound,std_neg_bound,n_ok,n_failed,best\n";
  for (const auto& s : g.summary) {
    out += std::string(to_string(s.objective)) + "," + std::to_string(s.M) + "," + fmt17(s.level_percent) + "," +
           fmt17(s.mean) + "," + fmt17(s.std) + "," + std::to_string(s.n_ok) + "," + std::to_string(s.n_failed) +
           "," + (s.best_in_row ? "1" : "0") + "\n";
  }
  return out;
}

std::string grid_text_table(const GridResult& g) {
  // Rows: (objective, M); columns: noise levels in first-seen order.
  std::vector<double> levels;
  std::vector<std::pair<Objective, std::size_t>> rows;
  for (const auto& s : g.summary) {
    if (std::find(levels.begin(), levels.end(), s.level_percent) == levels.end()) levels.push_back(s.level_percent);
    auto key = std::make_pair(s.objective, s.M);
    if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);
  }
  auto cell_text = [](const GridSummary& s) {
    if (s.n_ok == 0) return std::string("failed");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%.2f +- %.2f", s.best_in_row ? "*" : " ", s.mean, s.std);
    return std::string(buf);
  };
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-14s", "model");
  os << buf;
  for (double l : levels) {
    std::snprintf(buf, sizeof buf, " | %16s", ("noise " + fmt17(l)).c_str());
    os << buf;
  }
  os << "\n";
  for (const auto& [obj, m] : rows) {
    std::snprintf(buf, sizeof buf, "%-14s", (std::string(to_string(obj)) + " M=" + std::to_string(m)).c_str());
    os << buf;
    for (double l : levels) {
      std::string text = "-";
      for (const auto& s : g.summary)
        if (s.objective == obj && s.M == m && s.level_percent == l) text = cell_text(s);
      std::snprintf(buf, sizeof buf, " | %16s", text.c_str());
      os << buf;
    }
    os << "\n";
  }
  os << "(* best in row; mean +- sample std over seeds of the test negative bound, nats)\n";
  return os.str();
}

}  // namespace dvae
