#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dpgd/analysis.hpp"
#include "dpgd/model.hpp"
#include "dpgd/train.hpp"

namespace dpgd {

/*
 * Flat experiment description. Text form is one `section.key = value` per line,
 * with `#` starting a comment:
 *
 *   data.n = 200
 *   train.algo = dpgd
 *   train.sigma_b = 0.01
 */
struct ExperimentConfig {
  std::int64_t n = 1000;
  std::int64_t d = 2000;
  double mu_norm = 1.0;
  double sigma_p = 0.5;
  std::uint64_t data_seed = 1;

  std::int64_t m = 100;
  Activation activation;

  TrainConfig train;

  bool eval_enabled = true;
  EvalConfig eval;

  double privacy_delta = 1e-5;
  double theorem4_c = 1.0;

  std::vector<double> c_values{0.5, 1.0, 2.0};
  double analysis_delta = 0.01;
  double analysis_epsilon = 0.01;
  std::map<std::string, double> timescale_constants;

  std::vector<double> sweep_sigma_p{0.1, 0.3, 0.5};

  std::string output_dir = "out";
  bool emit_svg = true;

  /// Cross-section checks; throws ConfigError anchored at the offending key's line when known.
  void validate() const;

  /// Replaces every seed with one derived from `seed`.
  void reseed(std::uint64_t seed);

  SignalSpec signal() const;
  NoiseSpec noise() const;
  ProblemScales scales() const;

  /// Line numbers of keys set by parse_config; used to anchor validation errors.
  std::map<std::string, int> key_lines;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical text form; parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const ExperimentConfig& c);

}  // namespace dpgd
