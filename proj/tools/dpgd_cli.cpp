// Command-line driver: runs, sweeps and reports.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "dpgd/config.hpp"
#include "dpgd/errors.hpp"
#include "dpgd/experiment.hpp"
#include "dpgd/io.hpp"

namespace {

enum Exit { ok = 0, other = 1, config_error = 2, divergence = 3, incomplete_sweep = 4 };

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int workers = 1;
  bool svg = true;
  bool svg_set = false;
  std::optional<std::string> mode;
  bool json = false;
};

dpgd::ExperimentConfig load(const std::string& path, const Globals& g) {
  dpgd::ExperimentConfig cfg = dpgd::load_config(path);
  if (g.seed) cfg.reseed(*g.seed);
  if (g.out) cfg.output_dir = *g.out;
  if (g.svg_set) cfg.emit_svg = g.svg;
  if (g.mode) {
    cfg.train.mode = *g.mode == "kernel" ? dpgd::TrainMode::kernel : dpgd::TrainMode::direct;
  }
  cfg.validate();
  return cfg;
}

void emit(const dpgd::Report& r, const Globals& g, const std::string& name,
          const std::optional<std::string>& out_dir) {
  if (g.json) {
    std::cout << r.json.dump(2) << "\n";
  } else {
    std::cout << r.text;
  }
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    dpgd::write_json(std::filesystem::path(*out_dir) / (name + ".json"), r.json);
    dpgd::write_text(std::filesystem::path(*out_dir) / (name + ".txt"), r.text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DP-GD versus GD on signal-plus-noise data: training runs, sweeps and reports"};
  app.require_subcommand(1);
  Globals g;

  std::uint64_t seed = 0;
  std::string out, mode;
  auto* seed_opt = app.add_option("--seed", seed, "Derive all seeds from this value");
  auto* out_opt = app.add_option("--out", out, "Output directory (overrides output.dir)");
  app.add_option("--workers", g.workers, "Concurrent sweep cells")->check(CLI::PositiveNumber);
  auto* svg_flag = app.add_flag("--svg,!--no-svg", g.svg, "Write SVG charts");
  auto* mode_opt = app.add_option("--mode", mode, "Training mode")
                       ->check(CLI::IsMember({"direct", "kernel"}));
  app.add_flag("--json", g.json, "Print reports as JSON");

  std::string config_path, run_dir;
  auto* run = app.add_subcommand("run", "Train once and write all run artifacts");
  run->add_option("config", config_path, "Config file")->required();
  auto* fig = app.add_subcommand("figure1", "Sweep sigma_p x {gd, dpgd}");
  fig->add_option("config", config_path, "Base config file")->required();
  auto* priv = app.add_subcommand("privacy", "Privacy accounting table");
  priv->add_option("config", config_path, "Config file")->required();
  auto* cond = app.add_subcommand("conditions", "Evaluate the theoretical conditions");
  cond->add_option("config", config_path, "Config file")->required();
  auto* times = app.add_subcommand("timescales", "Predicted phase timescales");
  times->add_option("config", config_path, "Config file")->required();
  auto* dec = app.add_subcommand("decompose", "Recover coefficients of a finished run");
  dec->add_option("run-dir", run_dir, "Run directory")->required();
  for (auto* sub : {run, fig, priv, cond, times, dec}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Exit::ok : Exit::config_error;
  }
  if (seed_opt->count()) g.seed = seed;
  if (out_opt->count()) g.out = out;
  g.svg_set = svg_flag->count() > 0;
  if (mode_opt->count()) g.mode = mode;

  try {
    if (run->parsed()) {
      const auto cfg = load(config_path, g);
      const auto outcome = dpgd::run_experiment(cfg, cfg.output_dir);
      const auto& last = outcome.record.metrics.back();
      std::cout << "run finished: " << outcome.record.metrics.size() << " metric rows, final train loss "
                << last.train_loss;
      if (last.test_acc) std::cout << ", test accuracy " << *last.test_acc;
      std::cout << " (" << outcome.wall_seconds << " s) -> " << outcome.dir.string() << "\n";
      for (const auto& note : outcome.record.notes) std::cout << "note: " << note << "\n";
      return Exit::ok;
    }
    if (fig->parsed()) {
      const auto cfg = load(config_path, g);
      const auto sweep = dpgd::figure1_sweep(cfg, cfg.output_dir, g.workers);
      std::cout << dpgd::read_text(std::filesystem::path(cfg.output_dir) / "summary.txt");
      if (!sweep.complete()) {
        std::cerr << "sweep incomplete: see summary.txt\n";
        return Exit::incomplete_sweep;
      }
      return Exit::ok;
    }
    if (priv->parsed()) {
      emit(dpgd::privacy_report(load(config_path, g)), g, "privacy", g.out);
      return Exit::ok;
    }
    if (cond->parsed()) {
      emit(dpgd::conditions_report(load(config_path, g)), g, "conditions", g.out);
      return Exit::ok;
    }
    if (times->parsed()) {
      emit(dpgd::timescales_report(load(config_path, g)), g, "timescales", g.out);
      return Exit::ok;
    }
    if (dec->parsed()) {
      emit(dpgd::decompose_run(run_dir), g, "recovered", run_dir);
      return Exit::ok;
    }
  } catch (const dpgd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return Exit::config_error;
  } catch (const dpgd::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return Exit::divergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Exit::other;
  }
  return Exit::other;
}
