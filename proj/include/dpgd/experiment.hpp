#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpgd/config.hpp"
#include "dpgd/train.hpp"

namespace dpgd {

extern const char* const kVersion;

struct RunOutcome {
  RunRecord record;
  std::filesystem::path dir;
  double wall_seconds = 0.0;
};

/*
 * One training run with all artifacts written under `dir`: config.cfg, manifest.json,
 * data.bin, init.bin, final.bin, noise_sum.bin (DP-GD), checkpoints/, metrics.csv,
 * decomposition.csv, lambda.csv and, if enabled, SVG charts.
 */
RunOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& dir);

struct SweepCell {
  std::size_t sigma_index;
  double sigma_p;
  Algorithm algo;
  ExperimentConfig config;
  std::filesystem::path dir;
  bool ok = false;
  std::string error;
  std::optional<MetricsRow> final_metrics;
};

struct SweepOutcome {
  std::vector<SweepCell> cells;
  bool complete() const;
};

/// Per-cell configs for the sigma_p x {gd, dpgd} grid. Within one noise level both
/// algorithms share the data, init and test seeds, so the comparison is paired.
std::vector<SweepCell> plan_sweep(const ExperimentConfig& base, const std::filesystem::path& out);

/// Runs the grid with up to `workers` concurrent cells; failed cells are reported, not thrown.
SweepOutcome figure1_sweep(const ExperimentConfig& base, const std::filesystem::path& out,
                           int workers);

struct Report {
  std::string text;
  nlohmann::json json;
};

Report privacy_report(const ExperimentConfig& cfg);
Report conditions_report(const ExperimentConfig& cfg);
Report timescales_report(const ExperimentConfig& cfg);

/// Least-squares recovery of the final coefficients of a finished direct-mode run,
/// compared with the tracked ones when available. Writes recovered_*.csv into the run dir.
Report decompose_run(const std::filesystem::path& run_dir);

}  // namespace dpgd
