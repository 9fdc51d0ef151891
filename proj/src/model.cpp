#include "dpgd/model.hpp"

#include <utility>

namespace dpgd {

void Activation::validate() const {
  require(std::isfinite(kappa) && kappa > 0.0, ErrorCode::invalid_parameter,
          "kappa must be positive and finite");
  require(q >= 3, ErrorCode::invalid_parameter, "q must be an integer >= 3");
}

PerExampleState ExampleStates::at(Eigen::Index i) const {
  PerExampleState s;
  s.margin = margin[i];
  s.loss_deriv = loss_deriv[i];
  for (std::size_t b = 0; b < 2; ++b) {
    s.act_deriv_signal[b] = act_deriv_signal[b].col(i);
    s.act_deriv_noise[b] = act_deriv_noise[b].col(i);
  }
  return s;
}

void check_shapes(const Weights& w, const Dataset& data) {
  require(w.m() >= 1, ErrorCode::shape_mismatch, "weights have no filters");
  require(w.banks[1].rows() == w.m() && w.banks[1].cols() == w.d(), ErrorCode::shape_mismatch,
          "filter banks differ in shape");
  require(w.d() == data.d(), ErrorCode::shape_mismatch,
          "filter dimension " + std::to_string(w.d()) + " differs from data dimension " +
              std::to_string(data.d()));
}

ExampleStates states_from_inner_products(std::array<Eigen::VectorXd, 2> signal_inner,
                                         std::array<Eigen::MatrixXd, 2> noise_inner,
                                         const Eigen::VectorXd& labels, const Activation& a,
                                         std::int64_t step) {
  const Eigen::Index n = labels.size();
  const Eigen::Index m = signal_inner[0].size();
  ExampleStates s;
  s.step = step;
  s.labels = labels;
  s.margin.resize(n);
  s.loss_deriv.resize(n);
  Eigen::MatrixXd side(2, n);
  for (std::size_t b = 0; b < 2; ++b) {
    require(noise_inner[b].rows() == m && noise_inner[b].cols() == n, ErrorCode::shape_mismatch,
            "noise inner products have the wrong shape");
    s.act_deriv_signal[b].resize(m, n);
    s.act_deriv_noise[b].resize(m, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double sum = 0.0;
      for (Eigen::Index r = 0; r < m; ++r) {
        const auto sig = act_unchecked(labels[i] * signal_inner[b][r], a);
        const auto noi = act_unchecked(noise_inner[b](r, i), a);
        sum += sig.value + noi.value;
        s.act_deriv_signal[b](r, i) = sig.deriv;
        s.act_deriv_noise[b](r, i) = noi.deriv;
      }
      side(static_cast<Eigen::Index>(b), i) = sum / static_cast<double>(m);
    }
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    s.margin[i] = labels[i] * (side(0, i) - side(1, i));
    const auto l = logistic_loss_unchecked(s.margin[i]);
    s.loss_deriv[i] = l.deriv;
    total += l.value;
  }
  s.train_loss = total / static_cast<double>(n);
  if (!std::isfinite(s.train_loss)) throw DivergenceError(step, s.train_loss);
  s.signal_inner = std::move(signal_inner);
  s.noise_inner = std::move(noise_inner);
  return s;
}

ExampleStates evaluate_states(const Weights& w, const Dataset& data, const Activation& a,
                              std::int64_t step) {
  check_shapes(w, data);
  std::array<Eigen::VectorXd, 2> signal_inner;
  std::array<Eigen::MatrixXd, 2> noise_inner;
  for (std::size_t b = 0; b < 2; ++b) {
    signal_inner[b] = w.banks[b] * data.signal().mu;
    noise_inner[b].noalias() = w.banks[b] * data.noise_matrix().transpose();
  }
  return states_from_inner_products(std::move(signal_inner), std::move(noise_inner),
                                    data.labels(), a, step);
}

Weights gradient_from_states(const ExampleStates& states, const Dataset& data) {
  const Eigen::Index m = states.m();
  const Eigen::Index n = states.n();
  require(n == data.n(), ErrorCode::shape_mismatch, "states and dataset differ in n");
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(m));
  const Eigen::RowVectorXd loss_times_label =
      states.loss_deriv.cwiseProduct(states.labels).transpose();
  Weights grad(m, data.d());
  for (std::size_t b = 0; b < 2; ++b) {
    const double j = static_cast<double>(Weights::sign(b));
    const Eigen::VectorXd signal_coef = states.act_deriv_signal[b] * states.loss_deriv;
    const Eigen::MatrixXd noise_coef =
        states.act_deriv_noise[b].array().rowwise() * loss_times_label.array();
    grad.banks[b].noalias() = signal_coef * data.signal().mu.transpose();
    grad.banks[b].noalias() += noise_coef * data.noise_matrix();
    grad.banks[b] *= j * scale;
  }
  return grad;
}

GradientResult full_batch_gradient(const Weights& w, const Dataset& data, const Activation& a) {
  ExampleStates states = evaluate_states(w, data, a);
  Weights grad = gradient_from_states(states, data);
  const double loss = states.train_loss;
  return {std::move(grad), std::move(states), loss};
}

}  // namespace dpgd
