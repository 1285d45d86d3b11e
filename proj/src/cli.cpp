#include "dvae/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "dvae/config.hpp"
#include "dvae/data.hpp"
#include "dvae/error.hpp"
#include "dvae/kernels.hpp"
#include "dvae/train.hpp"
#include "dvae/verify.hpp"

namespace dvae::cli {

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> objective;
  std::optional<double> noise_level;
  std::optional<std::string> dataset;
  std::optional<std::string> dataset_path;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> samples_m;
  std::optional<std::size_t> samples_k;
  bool augment = false;
  bool full_scale = false;
  std::vector<std::string> sets;  ///< raw key=value pairs
};

void add_run_flags(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config_path, "key=value config file");
  app.add_option("--seed", o.seed, "run seed (replaces train.seeds)");
  app.add_option("--out", o.out, "output directory (out.dir)");
  app.add_option("--objective", o.objective, "vae | dvae | iwae | diwae");
  app.add_option("--noise-level", o.noise_level, "noise level in percent; corruption.level = value / 100");
  app.add_option("--dataset", o.dataset, "mnist | frey (dataset.name)")->check(CLI::IsMember({"mnist", "frey"}));
  app.add_option("--data", o.dataset_path, "dataset path (dataset.path)");
  app.add_option("--epochs", o.epochs, "train.epochs");
  app.add_option("--samples-m", o.samples_m, "samples.M");
  app.add_option("--samples-k", o.samples_k, "samples.K");
  app.add_flag("--augment", o.augment, "train.augment = true");
  app.add_flag("--full-scale", o.full_scale, "dataset.full_scale = true");
  app.add_option("--set", o.sets, "override any config key: --set key=value (repeatable)");
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Config file first, then --set pairs, then the dedicated flags.
RunConfig resolve(const Overrides& o) {
  ConfigMap cfg = o.config_path.empty() ? ConfigMap{} : ConfigMap::load(o.config_path);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(kv, "--set expects key=value");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.set("train.seeds", std::to_string(*o.seed));
  if (o.out) cfg.set("out.dir", *o.out);
  if (o.objective) cfg.set("objective", *o.objective);
  if (o.noise_level) cfg.set("corruption.level", fmt_double(*o.noise_level / 100.0));
  if (o.dataset) cfg.set("dataset.name", *o.dataset);
  if (o.dataset_path) cfg.set("dataset.path", *o.dataset_path);
  if (o.epochs) cfg.set("train.epochs", std::to_string(*o.epochs));
  if (o.samples_m) cfg.set("samples.M", std::to_string(*o.samples_m));
  if (o.samples_k) cfg.set("samples.K", std::to_string(*o.samples_k));
  if (o.augment) cfg.set("train.augment", "true");
  if (o.full_scale) cfg.set("dataset.full_scale", "true");
  RunConfig rc = make_run_config(cfg);
  rc.validate();
  return rc;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

std::filesystem::path prepare_out(const RunConfig& rc) {
  std::filesystem::path dir = rc.out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(rc.out_dir);
  std::filesystem::create_directories(dir);
  write_text(dir / "config.txt", format_run_config(rc));
  return dir;
}

int cmd_train(const Overrides& o, std::ostream& out) {
  RunConfig rc = resolve(o);
  kernels::set_num_threads(rc.threads);
  const Dataset ds = load_dataset(rc);
  rc.adam.lr = choose_learning_rate(rc, ds);
  const auto dir = prepare_out(rc);  // after data and rate selection: no stray files on failure

  std::ofstream metrics(dir / "metrics.csv", std::ios::binary);
  if (!metrics) throw Error("cannot write " + (dir / "metrics.csv").string());
  metrics << kMetricsHeader << "\n";
  bool any_diverged = false;
  for (const auto seed : rc.seeds) {
    const RunResult r = train(rc, ds, seed, [&](const MetricsRow& row) {
      metrics << format_metrics_row(row) << "\n";
      metrics.flush();
    });
    save_checkpoint((dir / ("seed-" + std::to_string(seed) + ".ckpt")).string(), r.best_params);
    out << "seed " << seed << ": best epoch " << r.best_epoch << ", test neg bound " << r.test.value << " +- "
        << r.test.std_error << (r.diverged ? " (diverged: " + r.error + ")" : "") << "\n";
    any_diverged = any_diverged || r.diverged;
  }
  return any_diverged ? kRuntime : kOk;
}

int cmd_eval(const Overrides& o, const std::string& checkpoint, const std::string& split, std::ostream& out) {
  RunConfig rc = resolve(o);
  kernels::set_num_threads(rc.threads);
  const Params params = load_checkpoint(checkpoint);
  if (!(params.arch() == rc.arch)) throw ConfigError("model", "checkpoint architecture does not match the config");
  const Dataset ds = load_dataset(rc);
  const Matrix& data = split == "val" ? ds.val : split == "train" ? ds.train : ds.test;
  const EstimatorConfig est = test_estimator(rc);
  const CorruptionSpec corruption = resolve_corruption(rc.corruption, ds);
  const BoundEstimate b = evaluate(params, data, est, corruption, rc.seeds.front());
  out << "split,objective,neg_bound,std_err\n"
      << split << "," << to_string(est.objective) << "," << fmt_double(b.value) << "," << fmt_double(b.std_error)
      << "\n";
  return kOk;
}

int cmd_grid(const Overrides& o, std::ostream& out, std::ostream& err) {
  RunConfig rc = resolve(o);
  const Dataset ds = load_dataset(rc);
  rc.adam.lr = choose_learning_rate(rc, ds);
  const auto dir = prepare_out(rc);  // after data and rate selection: no stray files on failure
  GridAxes axes;
  for (double l : rc.grid_levels) axes.levels_percent.push_back(l);
  axes.objectives = rc.grid_objectives;
  axes.Ms = rc.grid_M;
  axes.seeds = rc.seeds;
  const GridResult g = run_grid(rc, ds, axes, [&](const GridCell& c) {
    if (!c.ok) err << "cell " << to_string(c.objective) << " level " << c.level_percent << " seed " << c.seed
                   << " failed: " << c.error << "\n";
  });
  write_text(dir / "cells.csv", grid_cells_csv(g));
  write_text(dir / "summary.csv", grid_summary_csv(g));
  const std::string table = grid_text_table(g);
  write_text(dir / "table.txt", table);
  out << table;
  for (const auto& c : g.cells)
    if (!c.ok) return kRuntime;
  return kOk;
}

int cmd_verify(std::uint64_t seed, const verify::SuiteOptions& base, const std::string& out_path, std::ostream& out) {
  verify::SuiteOptions opts = base;
  opts.seed = seed;
  const auto reports = verify::run_suite(opts);
  std::ofstream file;
  if (!out_path.empty()) {
    std::filesystem::path p(out_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    file.open(p, std::ios::binary);
    if (!file) throw Error("cannot write " + out_path);
  }
  bool all = true;
  for (const auto& r : reports) {
    const std::string line = verify::to_json_line(r);
    out << line << "\n";
    if (file) file << line << "\n";
    all = all && r.pass;
  }
  return all ? kOk : kVerifyFailed;
}

int cmd_convert(const std::string& from, const std::string& input, const std::string& output) {
  const auto bytes = read_file_bytes(input);
  const std::size_t dim = kFreyHeight * kFreyWidth;
  RawImages images;
  if (from == "mat") {
    images = read_mat_uint8(bytes, dim);
  } else {
    if (bytes.empty() || bytes.size() % dim != 0)
      throw ParseError("raw input size is not a multiple of " + std::to_string(dim), bytes.size());
    images.count = bytes.size() / dim;
    images.pixels = bytes;
  }
  images.height = kFreyHeight;
  images.width = kFreyWidth;
  write_text(output, format_frey(images));
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Denoising variational auto-encoders: training, evaluation and numerical checks", "dvae"};
  app.require_subcommand(1);
  app.footer("Flags override keys from --config; --set key=value overrides any key.\n\n" + config_help() +
             "\nExit codes: 0 success, 1 usage or config error, 2 runtime failure, 3 verification failure.");

  Overrides train_o, eval_o, grid_o;
  auto* train_cmd = app.add_subcommand("train", "train one model per seed; writes metrics.csv and checkpoints");
  add_run_flags(*train_cmd, train_o);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint's bound on a split");
  add_run_flags(*eval_cmd, eval_o);
  std::string checkpoint, split = "test";
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--split", split, "train | val | test")->check(CLI::IsMember({"train", "val", "test"}));

  auto* grid_cmd = app.add_subcommand("grid", "train every (objective, M, noise level, seed) cell");
  add_run_flags(*grid_cmd, grid_o);

  auto* verify_cmd = app.add_subcommand("verify", "run the numerical oracle suite; JSON lines on stdout");
  std::uint64_t verify_seed = 0;
  std::string verify_out;
  verify::SuiteOptions suite;
  verify_cmd->add_option("--seed", verify_seed, "suite seed");
  verify_cmd->add_option("--out", verify_out, "also write the report to this file");
  verify_cmd->add_option("--testbeds", suite.testbeds, "random testbeds for the exact checks");
  verify_cmd->add_option("--mc-trials", suite.mc_trials, "Monte Carlo sandwich trials");
  verify_cmd->add_option("--gibbs-trials", suite.gibbs_trials, "random pairs for the Gibbs check");

  auto* convert_cmd = app.add_subcommand("convert-data", "convert Frey Face data to the portable text format");
  std::string from, input, output;
  convert_cmd->add_option("--from", from, "mat | raw")->required()->check(CLI::IsMember({"mat", "raw"}));
  convert_cmd->add_option("--input", input, "source file")->required();
  convert_cmd->add_option("--output", output, "destination file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_o, out);
    if (*eval_cmd) return cmd_eval(eval_o, checkpoint, split, out);
    if (*grid_cmd) return cmd_grid(grid_o, out, err);
    if (*verify_cmd) return cmd_verify(verify_seed, suite, verify_out, out);
    if (*convert_cmd) return cmd_convert(from, input, output);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace dvae::cli
