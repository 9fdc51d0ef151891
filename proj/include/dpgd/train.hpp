#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpgd/analysis.hpp"
#include "dpgd/data.hpp"
#include "dpgd/decomp.hpp"
#include "dpgd/model.hpp"

namespace dpgd {

enum class Algorithm { gd, dpgd };
enum class TrainMode { direct, kernel };
/// Where kernel-mode DP-GD gets its noise projections.
enum class KernelNoiseKind { sampled, shared };

std::string to_string(Algorithm algo);
std::string to_string(TrainMode mode);

struct TrainConfig {
  double eta = 0.1;
  std::int64_t steps = 0;
  double sigma0 = 0.01;
  double sigma_b = 0.0;
  Algorithm algo = Algorithm::gd;
  TrainMode mode = TrainMode::direct;
  KernelNoiseKind kernel_noise = KernelNoiseKind::sampled;
  std::uint64_t seed = 0;
  std::int64_t eval_every = 100;
  std::int64_t checkpoint_every = 0;  // 0 = never
  bool track_decomposition = true;

  void validate() const;
};

/// Entries i.i.d. N(0, sigma0^2); filter (bank, r) drawn from Stream(seed, weight_init, bank*m + r).
Weights init_weights(Eigen::Index m, Eigen::Index d, double sigma0, std::uint64_t seed);

/*
 * Replayable standard-normal noise for DP-GD. The vector for (step, bank, r)
 * depends only on the seed and those coordinates, so a run can be replayed or
 * projected (kernel mode) without storing the noise.
 */
class GaussianNoiseSource {
 public:
  explicit GaussianNoiseSource(std::uint64_t seed) : seed_(seed) {}

  Eigen::VectorXd draw(std::int64_t step, std::size_t bank, Eigen::Index filter,
                       Eigen::Index d) const;
  /// All 2m filters of one step, scaled by sigma_b.
  Weights draw_step(std::int64_t step, Eigen::Index m, Eigen::Index d, double sigma_b) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

/// w - eta * grad.
Weights gd_step(const Weights& w, const Dataset& data, const Activation& a, double eta);

struct DpStepResult {
  Weights weights;
  Weights injected_noise;  // b_{j,r,t}, already scaled by sigma_b
};

/// w - eta * (grad + b), b ~ N(0, sigma_b^2 I) per filter from `noise` at `step`.
DpStepResult dpgd_step(const Weights& w, const Dataset& data, const Activation& a, double eta,
                       double sigma_b, const GaussianNoiseSource& noise, std::int64_t step = 0);

/*
 * Inner products tracked by the kernel trainer instead of d-dimensional
 * filters: sig[b][r] = <w_{j,r}, mu>, noi[b](r, i) = <w_{j,r}, xi_i>.
 */
struct KernelState {
  std::array<Eigen::VectorXd, 2> sig;
  std::array<Eigen::MatrixXd, 2> noi;
  Eigen::MatrixXd gram;
  Eigen::VectorXd mu_xi;
  double mu_norm_sq = 0.0;

  static KernelState from_weights(const Weights& w, const Dataset& data);
};

/// Applies the exact inner-product recurrences of one GD step.
void kernel_gradient_update(KernelState& state, const ExampleStates& states, double eta);

/// Noise projections (<b, mu>, <b, xi_1>, ..., <b, xi_n>) for all filters of a bank.
class KernelNoise {
 public:
  virtual ~KernelNoise() = default;
  /// Returns an (n+1) x m matrix, column r for filter r.
  virtual Eigen::MatrixXd project(std::int64_t step, std::size_t bank, Eigen::Index m) const = 0;
};

/// Joint Gaussian with covariance sigma_b^2 [ |mu|^2, <mu, xi>; <xi, mu>, Gram ] via a one-time factor.
class SampledKernelNoise final : public KernelNoise {
 public:
  SampledKernelNoise(const Dataset& data, double sigma_b, std::uint64_t seed);
  Eigen::MatrixXd project(std::int64_t step, std::size_t bank, Eigen::Index m) const override;

 private:
  Eigen::MatrixXd factor_;
  std::uint64_t seed_;
};

/// Projects exactly the vectors a direct run with the same seed would inject.
class SharedKernelNoise final : public KernelNoise {
 public:
  SharedKernelNoise(const Dataset& data, double sigma_b, std::uint64_t seed);
  Eigen::MatrixXd project(std::int64_t step, std::size_t bank, Eigen::Index m) const override;

 private:
  const Dataset& data_;
  double sigma_b_;
  GaussianNoiseSource source_;
};

void kernel_noise_update(KernelState& state, const KernelNoise& noise, std::int64_t step,
                         double eta);

struct MetricsRow {
  std::int64_t step = 0;
  double train_loss = 0.0;
  std::optional<double> test_loss;
  std::optional<double> test_error;
  std::optional<double> test_acc;
  std::optional<double> gamma_mean;
  std::optional<double> rho_pos_mean;
  std::optional<double> rho_neg_mean;
};

struct RunRecord {
  TrainConfig config;
  Activation activation;
  std::vector<MetricsRow> metrics;
  std::map<std::int64_t, Weights> checkpoints;
  Weights initial_weights;
  std::optional<Weights> final_weights;      // direct mode
  std::optional<KernelState> final_kernel;  // kernel mode
  std::optional<Decomposition> decomposition;
  std::vector<DecompositionRow> decomposition_trace;
  std::vector<LambdaRow> lambda_trace;
  std::uint64_t init_seed = 0;
  std::uint64_t noise_seed = 0;
  bool test_metrics_available = false;
  std::vector<std::string> notes;
};

/// What the observer sees at every step t = 0..T, before the update to t+1.
struct StepView {
  std::int64_t step;
  const ExampleStates& states;
  const Weights* weights;        // direct mode
  const KernelState* kernel;     // kernel mode
  const Decomposition* decomposition;
};

using StepObserver = std::function<void(const StepView&)>;

struct RunOptions {
  std::optional<EvalConfig> eval;  // test metrics (direct mode only)
  StepObserver observer;
  double divergence_threshold = 1e6;
};

RunRecord run_training(const Dataset& data, Eigen::Index m, const Activation& a,
                       const TrainConfig& cfg, const RunOptions& options = {});

/// Rows where a metrics line is recorded: 0, k, 2k, ..., and T.
bool is_eval_step(std::int64_t step, std::int64_t steps, std::int64_t eval_every);

}  // namespace dpgd
