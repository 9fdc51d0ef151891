#include "dpgd/train.hpp"

#include <cmath>
#include <utility>

#include "dpgd/errors.hpp"

namespace dpgd {

std::string to_string(Algorithm algo) { return algo == Algorithm::gd ? "gd" : "dpgd"; }
std::string to_string(TrainMode mode) { return mode == TrainMode::direct ? "direct" : "kernel"; }

void TrainConfig::validate() const {
  require(std::isfinite(eta) && eta > 0.0, ErrorCode::invalid_parameter, "eta must be positive");
  require(steps >= 0, ErrorCode::invalid_parameter, "steps must be non-negative");
  require(std::isfinite(sigma0) && sigma0 >= 0.0, ErrorCode::invalid_parameter,
          "sigma0 must be non-negative");
  require(std::isfinite(sigma_b) && sigma_b >= 0.0, ErrorCode::invalid_parameter,
          "sigma_b must be non-negative");
  require(algo != Algorithm::dpgd || sigma_b > 0.0, ErrorCode::invalid_parameter,
          "dpgd requires sigma_b > 0");
  require(eval_every >= 1, ErrorCode::invalid_parameter, "eval_every must be positive");
  require(checkpoint_every >= 0, ErrorCode::invalid_parameter,
          "checkpoint_every must be positive or 0 (never)");
}

Weights init_weights(Eigen::Index m, Eigen::Index d, double sigma0, std::uint64_t seed) {
  require(m >= 1 && d >= 1, ErrorCode::invalid_parameter, "m and d must be positive");
  require(sigma0 >= 0.0, ErrorCode::invalid_parameter, "sigma0 must be non-negative");
  Weights w(m, d);
  if (sigma0 == 0.0) return w;
  for (std::size_t b = 0; b < 2; ++b) {
    for (Eigen::Index r = 0; r < m; ++r) {
      Stream stream(seed, StreamTag::weight_init, static_cast<std::uint64_t>(b) * m + r);
      for (Eigen::Index k = 0; k < d; ++k) w.banks[b](r, k) = stream.normal(sigma0);
    }
  }
  return w;
}

Eigen::VectorXd GaussianNoiseSource::draw(std::int64_t step, std::size_t bank,
                                          Eigen::Index filter, Eigen::Index d) const {
  Stream stream(derive_seed(seed_, static_cast<std::uint64_t>(step)), StreamTag::dp_noise,
                (static_cast<std::uint64_t>(bank) << 32) | static_cast<std::uint64_t>(filter));
  Eigen::VectorXd z(d);
  for (Eigen::Index k = 0; k < d; ++k) z[k] = stream.normal();
  return z;
}

Weights GaussianNoiseSource::draw_step(std::int64_t step, Eigen::Index m, Eigen::Index d,
                                       double sigma_b) const {
  Weights b(m, d);
  if (sigma_b == 0.0) return b;
  for (std::size_t bank = 0; bank < 2; ++bank) {
    for (Eigen::Index r = 0; r < m; ++r) {
      b.banks[bank].row(r) = sigma_b * draw(step, bank, r, d).transpose();
    }
  }
  return b;
}

namespace {

void apply_step(Weights& w, const Weights& grad, double eta) {
  for (std::size_t b = 0; b < 2; ++b) w.banks[b] -= eta * grad.banks[b];
}

}  // namespace

Weights gd_step(const Weights& w, const Dataset& data, const Activation& a, double eta) {
  const GradientResult g = full_batch_gradient(w, data, a);
  Weights next = w;
  apply_step(next, g.grad, eta);
  return next;
}

DpStepResult dpgd_step(const Weights& w, const Dataset& data, const Activation& a, double eta,
                       double sigma_b, const GaussianNoiseSource& noise, std::int64_t step) {
  require(sigma_b >= 0.0, ErrorCode::invalid_parameter, "sigma_b must be non-negative");
  GradientResult g = full_batch_gradient(w, data, a);
  Weights injected = noise.draw_step(step, w.m(), w.d(), sigma_b);
  g.grad += injected;
  Weights next = w;
  apply_step(next, g.grad, eta);
  return {std::move(next), std::move(injected)};
}

KernelState KernelState::from_weights(const Weights& w, const Dataset& data) {
  check_shapes(w, data);
  require(data.gram().has_value(), ErrorCode::missing_precompute,
          "kernel mode requires the dataset Gram matrix");
  KernelState s;
  for (std::size_t b = 0; b < 2; ++b) {
    s.sig[b] = w.banks[b] * data.signal().mu;
    s.noi[b].noalias() = w.banks[b] * data.noise_matrix().transpose();
  }
  s.gram = *data.gram();
  s.mu_xi = data.noise_matrix() * data.signal().mu;
  s.mu_norm_sq = data.signal().norm_sq();
  return s;
}

void kernel_gradient_update(KernelState& state, const ExampleStates& states, double eta) {
  const Eigen::Index n = states.n();
  const Eigen::Index m = states.m();
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(m));
  const Eigen::RowVectorXd loss_times_label =
      states.loss_deriv.cwiseProduct(states.labels).transpose();
  for (std::size_t b = 0; b < 2; ++b) {
    const double j = static_cast<double>(Weights::sign(b));
    const Eigen::VectorXd signal_coef = states.act_deriv_signal[b] * states.loss_deriv;
    const Eigen::MatrixXd noise_coef =
        states.act_deriv_noise[b].array().rowwise() * loss_times_label.array();
    // <grad, mu> and <grad, xi_k> expressed through the Gram system.
    Eigen::VectorXd grad_mu = signal_coef * state.mu_norm_sq + noise_coef * state.mu_xi;
    Eigen::MatrixXd grad_xi = signal_coef * state.mu_xi.transpose();
    grad_xi.noalias() += noise_coef * state.gram;
    state.sig[b] -= (eta * j * scale) * grad_mu;
    state.noi[b] -= (eta * j * scale) * grad_xi;
  }
}

SampledKernelNoise::SampledKernelNoise(const Dataset& data, double sigma_b, std::uint64_t seed)
    : seed_(seed) {
  require(data.gram().has_value(), ErrorCode::missing_precompute,
          "kernel mode requires the dataset Gram matrix");
  const Eigen::Index n = data.n();
  Eigen::MatrixXd cov(n + 1, n + 1);
  cov(0, 0) = data.signal().norm_sq();
  const Eigen::VectorXd mu_xi = data.noise_matrix() * data.signal().mu;
  cov.block(1, 0, n, 1) = mu_xi;
  cov.block(0, 1, 1, n) = mu_xi.transpose();
  cov.bottomRightCorner(n, n) = *data.gram();
  cov *= sigma_b * sigma_b;
  // Symmetric square root tolerates the rank deficiency when n + 1 > d.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  factor_ = eig.eigenvectors() * root.asDiagonal();
}

Eigen::MatrixXd SampledKernelNoise::project(std::int64_t step, std::size_t bank,
                                            Eigen::Index m) const {
  const Eigen::Index dim = factor_.rows();
  Eigen::MatrixXd z(dim, m);
  for (Eigen::Index r = 0; r < m; ++r) {
    Stream stream(derive_seed(seed_, static_cast<std::uint64_t>(step)), StreamTag::kernel_noise,
                  (static_cast<std::uint64_t>(bank) << 32) | static_cast<std::uint64_t>(r));
    for (Eigen::Index k = 0; k < dim; ++k) z(k, r) = stream.normal();
  }
  return factor_ * z;
}

SharedKernelNoise::SharedKernelNoise(const Dataset& data, double sigma_b, std::uint64_t seed)
    : data_(data), sigma_b_(sigma_b), source_(seed) {}

Eigen::MatrixXd SharedKernelNoise::project(std::int64_t step, std::size_t bank,
                                           Eigen::Index m) const {
  const Eigen::Index n = data_.n();
  const Eigen::Index d = data_.d();
  Eigen::MatrixXd noise(d, m);
  for (Eigen::Index r = 0; r < m; ++r) noise.col(r) = sigma_b_ * source_.draw(step, bank, r, d);
  Eigen::MatrixXd out(n + 1, m);
  out.row(0) = data_.signal().mu.transpose() * noise;
  out.bottomRows(n).noalias() = data_.noise_matrix() * noise;
  return out;
}

void kernel_noise_update(KernelState& state, const KernelNoise& noise, std::int64_t step,
                         double eta) {
  for (std::size_t b = 0; b < 2; ++b) {
    const Eigen::Index m = state.sig[b].size();
    const Eigen::MatrixXd proj = noise.project(step, b, m);
    state.sig[b] -= eta * proj.row(0).transpose();
    state.noi[b] -= eta * proj.bottomRows(proj.rows() - 1).transpose();
  }
}

bool is_eval_step(std::int64_t step, std::int64_t steps, std::int64_t eval_every) {
  return step == steps || step % eval_every == 0;
}

RunRecord run_training(const Dataset& data, Eigen::Index m, const Activation& a,
                       const TrainConfig& cfg, const RunOptions& options) {
  cfg.validate();
  a.validate();
  const bool kernel = cfg.mode == TrainMode::kernel;
  const bool noisy = cfg.algo == Algorithm::dpgd;
  if (kernel) {
    require(data.gram().has_value(), ErrorCode::missing_precompute,
            "kernel mode requires the dataset Gram matrix");
  }

  RunRecord record;
  record.config = cfg;
  record.activation = a;
  record.init_seed = cfg.seed;
  record.noise_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(StreamTag::dp_noise));
  record.initial_weights = init_weights(m, data.d(), cfg.sigma0, cfg.seed);
  record.test_metrics_available = options.eval.has_value() && !kernel;
  if (kernel && options.eval) {
    record.notes.push_back(
        "test metrics unavailable in kernel mode: filters are never materialized");
  }
  if (noisy) {
    record.notes.push_back(
        "DP-GD runs without gradient clipping; privacy accounting assumes |xi_i|^2 <= "
        "3 sigma_p^2 d / 2 for every training example");
  }

  const GaussianNoiseSource noise_source(record.noise_seed);
  std::unique_ptr<KernelNoise> kernel_noise;
  if (kernel && noisy) {
    if (cfg.kernel_noise == KernelNoiseKind::shared) {
      kernel_noise = std::make_unique<SharedKernelNoise>(data, cfg.sigma_b, record.noise_seed);
    } else {
      kernel_noise = std::make_unique<SampledKernelNoise>(data, cfg.sigma_b, record.noise_seed);
    }
  }

  Weights w = record.initial_weights;
  std::optional<KernelState> kstate;
  if (kernel) kstate = KernelState::from_weights(w, data);

  std::optional<Decomposition> dec;
  if (cfg.track_decomposition) {
    dec = Decomposition::zero(m, data.labels(), cfg.eta, noisy && !kernel, data.d());
    if (noisy && kernel) {
      // The unprojected part of the noise is never materialized.
      dec->injected_noise = true;
      record.notes.push_back("kernel-mode DP-GD decomposition carries no noise_sum");
    }
  }

  const double mu_norm_sq = data.signal().norm_sq();
  for (std::int64_t t = 0;; ++t) {
    ExampleStates states =
        kernel ? states_from_inner_products(kstate->sig, kstate->noi, data.labels(), a, t)
               : evaluate_states(w, data, a, t);
    if (!(states.train_loss <= options.divergence_threshold)) {
      throw DivergenceError(t, states.train_loss);
    }

    if (options.observer) {
      options.observer(StepView{t, states, kernel ? nullptr : &w, kernel ? &*kstate : nullptr,
                                dec ? &*dec : nullptr});
    }

    if (is_eval_step(t, cfg.steps, cfg.eval_every)) {
      MetricsRow row;
      row.step = t;
      row.train_loss = states.train_loss;
      if (record.test_metrics_available) {
        const EvalConfig& ev = *options.eval;
        const bool due = t == cfg.steps || (ev.every > 0 && t % ev.every == 0);
        if (due) {
          const TestMetrics tm = evaluate_test_metrics(w, data.signal(), data.noise(), a, ev);
          row.test_loss = tm.test_loss;
          row.test_error = tm.test_error;
          row.test_acc = 1.0 - tm.test_error;
        }
      }
      if (dec) {
        const DecompositionSummary s = summarize(*dec);
        row.gamma_mean = s.gamma_mean;
        row.rho_pos_mean = s.rho_pos_mean;
        row.rho_neg_mean = s.rho_neg_mean;
        auto rows = decomposition_rows(*dec);
        record.decomposition_trace.insert(record.decomposition_trace.end(), rows.begin(),
                                          rows.end());
        auto lrows = lambda_rows(*dec);
        record.lambda_trace.insert(record.lambda_trace.end(), lrows.begin(), lrows.end());
      }
      record.metrics.push_back(row);
    }
    if (!kernel && cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0) {
      record.checkpoints.emplace(t, w);
    }

    if (t == cfg.steps) break;

    if (dec) {
      *dec = advance_coefficients(*dec, states, cfg.eta, mu_norm_sq, data.noise_norms_sq());
    }
    if (kernel) {
      kernel_gradient_update(*kstate, states, cfg.eta);
      if (noisy) kernel_noise_update(*kstate, *kernel_noise, t, cfg.eta);
    } else {
      Weights grad = gradient_from_states(states, data);
      if (noisy) {
        const Weights injected = noise_source.draw_step(t, m, data.d(), cfg.sigma_b);
        grad += injected;
        if (dec && dec->noise_sum) accumulate_noise(*dec, injected);
      }
      apply_step(w, grad, cfg.eta);
      if (!w.all_finite()) throw DivergenceError(t + 1, std::numeric_limits<double>::infinity());
    }
  }

  if (kernel) {
    record.final_kernel = std::move(kstate);
  } else {
    record.final_weights = std::move(w);
  }
  record.decomposition = std::move(dec);
  return record;
}

}  // namespace dpgd
