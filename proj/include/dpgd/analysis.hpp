#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpgd/data.hpp"
#include "dpgd/model.hpp"

namespace dpgd {

enum class TiePolicy { error, half };

struct EvalConfig {
  std::int64_t n_test = 10000;
  std::uint64_t seed = 0;
  TiePolicy tie_policy = TiePolicy::error;
  /// Test metrics every this many steps during training; 0 = final step only.
  std::int64_t every = 0;
};

struct TestMetrics {
  double test_loss;
  double test_error;
  double std_err_loss;
  double std_err_error;
};

/// Monte Carlo estimate over n_test fresh draws; draw i uses Stream(seed, test_example, i).
TestMetrics evaluate_test_metrics(const Weights& w, const SignalSpec& signal,
                                  const NoiseSpec& noise, const Activation& a,
                                  const EvalConfig& cfg);

/// All the scales the condition and timescale formulas read.
struct ProblemScales {
  Eigen::Index n = 1000;
  Eigen::Index d = 2000;
  Eigen::Index m = 100;
  double mu_norm = 1.0;
  double sigma_p = 0.5;
  double kappa = 0.1;
  int q = 3;
  double sigma0 = 0.01;
  double eta = 0.1;
  double sigma_b = 0.01;
  double delta = 0.01;
  /// Iteration horizon substituted for T* / T~* inside logarithms.
  double horizon = 20000;

  double snr_inverse() const;
  double noise_energy() const;  // sigma_p^2 d
};

enum class ConditionKind { condition1, condition2 };
enum class Relation { at_least, at_most };

/*
 * One itemized inequality lhs (>= or <=) rhs(C) with rhs(C) = rhs_base * C^c_power.
 * Logarithmic factors are evaluated literally; no hidden constants beyond C.
 */
struct ConditionItem {
  std::string name;
  std::string formula;
  double lhs;
  double rhs_base;
  int c_power;
  Relation relation;
  std::map<double, double> rhs_at_C;
  std::map<double, bool> holds_at_C;

  double rhs(double C) const;
  bool holds(double C) const;
};

struct ConditionReport {
  ConditionKind which;
  std::vector<double> c_values;
  std::vector<ConditionItem> items;

  const ConditionItem& item(const std::string& name) const;
};

ConditionReport check_conditions(const ProblemScales& p, ConditionKind which,
                                 const std::vector<double>& c_values);

/// Order-of-magnitude step counts; empty when a formula is undefined (e.g. sigma_b = 0).
struct TimescaleReport {
  std::optional<double> T1, T2, T_star;
  std::optional<double> T1_tilde, T2_tilde, T_star_tilde;
  /// c * m / (eta |mu|^2): the early-stopping time paired with the sigma_b choice.
  double T2_tilde_early_stop;
  /// n m / (eta max{n |mu|^2, sigma_p^2 d}).
  double signal_timescale;
  double c1, c2;
  double epsilon;
  std::map<std::string, double> constants_used;
};

/// Recognised constants (default 1): c_T1, c_T_star, c_T1_tilde, c_T2_tilde, c_T_star_tilde,
/// c_T2_tilde_early_stop.
TimescaleReport compute_timescales(const ProblemScales& p,
                                   const std::map<std::string, double>& constants = {},
                                   double epsilon = 0.01);

enum class CheckStatus { pass, fail, not_applicable };
std::string to_string(CheckStatus s);

struct PreliminaryItem {
  std::string name;
  CheckStatus status;
  double observed_min;
  double observed_max;
  double lower;  // -inf when unbounded
  double upper;  // +inf when unbounded
  std::string note;
};

struct PreliminaryReport {
  std::vector<PreliminaryItem> items;
  bool all_pass() const;  // every applicable item passes
  const PreliminaryItem& item(const std::string& name) const;
};

/// Checks the high-probability data and initialization events on one realization.
PreliminaryReport verify_preliminaries(const Dataset& data, const Weights& w0, double sigma0,
                                       double delta);

}  // namespace dpgd
