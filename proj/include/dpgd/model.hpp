#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>

#include "dpgd/data.hpp"
#include "dpgd/errors.hpp"

namespace dpgd {

/// Huberized ReLU: zero below 0, z^q / (q kappa^(q-1)) on [0, kappa], linear above.
struct Activation {
  double kappa = 0.1;
  int q = 3;
  void validate() const;
};

template <typename Scalar>
struct ActValue {
  Scalar value;
  Scalar deriv;
};

/// x^k by repeated multiplication (k >= 0).
template <typename Scalar>
inline Scalar int_pow(Scalar x, int k) {
  Scalar out(1);
  for (int i = 0; i < k; ++i) out *= x;
  return out;
}

template <typename Scalar>
inline ActValue<Scalar> act_unchecked(Scalar z, const Activation& a) {
  const Scalar kappa(a.kappa);
  if (z < Scalar(0)) return {Scalar(0), Scalar(0)};
  if (z <= kappa) {
    const Scalar ratio = z / kappa;
    const Scalar deriv = int_pow(ratio, a.q - 1);
    return {kappa * deriv * ratio / Scalar(a.q), deriv};
  }
  return {z - kappa + kappa / Scalar(a.q), Scalar(1)};
}

template <typename Scalar>
inline ActValue<Scalar> act(Scalar z, const Activation& a) {
  require(std::isfinite(static_cast<double>(z)), ErrorCode::invalid_input,
          "activation input must be finite");
  return act_unchecked(z, a);
}

/// log(1 + e^-t) and its derivative -1 / (1 + e^t), stable on both tails.
template <typename Scalar>
inline ActValue<Scalar> logistic_loss_unchecked(Scalar margin) {
  using std::exp;
  using std::log1p;
  if (margin > Scalar(0)) {
    const Scalar e = exp(-margin);
    return {log1p(e), -e / (Scalar(1) + e)};
  }
  const Scalar e = exp(margin);
  return {-margin + log1p(e), Scalar(-1) / (Scalar(1) + e)};
}

template <typename Scalar>
inline ActValue<Scalar> logistic_loss(Scalar margin) {
  require(std::isfinite(static_cast<double>(margin)), ErrorCode::invalid_input,
          "margin must be finite");
  return logistic_loss_unchecked(margin);
}

/*
 * Filter banks of the two-layer CNN. banks[0] holds the filters w_{+1,r} and
 * banks[1] the filters w_{-1,r}; row r of a bank is one filter in R^d.
 */
template <typename Scalar>
struct BasicWeights {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  std::array<Matrix, 2> banks;

  BasicWeights() = default;
  BasicWeights(Eigen::Index m, Eigen::Index d) : banks{Matrix::Zero(m, d), Matrix::Zero(m, d)} {}

  Eigen::Index m() const { return banks[0].rows(); }
  Eigen::Index d() const { return banks[0].cols(); }

  static constexpr int sign(std::size_t bank) { return bank == 0 ? 1 : -1; }
  static constexpr std::size_t bank_index(int j) { return j > 0 ? 0 : 1; }

  Matrix& bank(int j) { return banks[bank_index(j)]; }
  const Matrix& bank(int j) const { return banks[bank_index(j)]; }

  template <typename Other>
  BasicWeights<Other> cast() const {
    BasicWeights<Other> out;
    out.banks = {banks[0].template cast<Other>(), banks[1].template cast<Other>()};
    return out;
  }

  bool all_finite() const { return banks[0].allFinite() && banks[1].allFinite(); }
  Scalar squared_norm() const { return banks[0].squaredNorm() + banks[1].squaredNorm(); }
  Scalar norm() const { using std::sqrt; return sqrt(squared_norm()); }

  BasicWeights& operator+=(const BasicWeights& other) {
    banks[0] += other.banks[0];
    banks[1] += other.banks[1];
    return *this;
  }
  BasicWeights& operator-=(const BasicWeights& other) {
    banks[0] -= other.banks[0];
    banks[1] -= other.banks[1];
    return *this;
  }

  friend bool operator==(const BasicWeights& a, const BasicWeights& b) {
    return a.banks[0].rows() == b.banks[0].rows() && a.banks[0].cols() == b.banks[0].cols() &&
           a.banks[0] == b.banks[0] && a.banks[1] == b.banks[1];
  }
};

using Weights = BasicWeights<double>;

template <typename Scalar>
inline BasicWeights<Scalar> operator-(BasicWeights<Scalar> a, const BasicWeights<Scalar>& b) {
  a -= b;
  return a;
}

template <typename Scalar>
inline BasicWeights<Scalar> operator+(BasicWeights<Scalar> a, const BasicWeights<Scalar>& b) {
  a += b;
  return a;
}

template <typename Scalar>
struct ForwardValue {
  Scalar f;
  Scalar f_plus;
  Scalar f_minus;
};

/// f(W, x) = F_{+1} - F_{-1}, with F_j = (1/m) sum_r [sigma(<w_{j,r}, x1>) + sigma(<w_{j,r}, x2>)].
template <typename Scalar, typename PatchA, typename PatchB>
ForwardValue<Scalar> forward(const BasicWeights<Scalar>& w, const Eigen::MatrixBase<PatchA>& x1,
                             const Eigen::MatrixBase<PatchB>& x2, const Activation& a) {
  require(x1.size() == w.d() && x2.size() == w.d(), ErrorCode::shape_mismatch,
          "patch dimension differs from filter dimension");
  std::array<Scalar, 2> side{Scalar(0), Scalar(0)};
  for (std::size_t b = 0; b < 2; ++b) {
    const auto z1 = w.banks[b] * x1.template cast<Scalar>();
    const auto z2 = w.banks[b] * x2.template cast<Scalar>();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pre1 = z1;
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pre2 = z2;
    Scalar sum(0);
    for (Eigen::Index r = 0; r < w.m(); ++r) {
      sum += act_unchecked(pre1[r], a).value + act_unchecked(pre2[r], a).value;
    }
    side[b] = sum / Scalar(w.m());
  }
  return {side[0] - side[1], side[0], side[1]};
}

template <typename Scalar>
ForwardValue<Scalar> forward(const BasicWeights<Scalar>& w, const Example& x, const Activation& a) {
  return forward(w, x.patch_a, x.patch_b, a);
}

/// L_S(W) = (1/n) sum_i l(y_i f(W, x_i)), evaluated patch by patch.
template <typename Scalar>
Scalar empirical_loss(const BasicWeights<Scalar>& w, const Dataset& data, const Activation& a) {
  Scalar total(0);
  for (const Example& ex : data.examples()) {
    const Scalar margin = Scalar(ex.label) * forward(w, ex, a).f;
    total += logistic_loss_unchecked(margin).value;
  }
  return total / Scalar(data.n());
}

/// Per-example view of one gradient evaluation.
struct PerExampleState {
  double margin;
  double loss_deriv;
  std::array<Eigen::VectorXd, 2> act_deriv_signal;  // sigma'(<w_{j,r}, y_i mu>) over r
  std::array<Eigen::VectorXd, 2> act_deriv_noise;   // sigma'(<w_{j,r}, xi_i>) over r
};

/*
 * Everything a gradient step needs about the current iterate, stored by bank
 * as m x n matrices. Both the direct trainer (inner products from W) and the
 * kernel trainer (tracked inner products) produce this.
 */
struct ExampleStates {
  std::int64_t step = 0;
  Eigen::VectorXd labels;
  Eigen::VectorXd margin;
  Eigen::VectorXd loss_deriv;
  std::array<Eigen::VectorXd, 2> signal_inner;     // <w_{j,r}, mu>, length m
  std::array<Eigen::MatrixXd, 2> noise_inner;      // <w_{j,r}, xi_i>, m x n
  std::array<Eigen::MatrixXd, 2> act_deriv_signal; // m x n
  std::array<Eigen::MatrixXd, 2> act_deriv_noise;  // m x n
  double train_loss = 0.0;

  Eigen::Index n() const { return margin.size(); }
  Eigen::Index m() const { return signal_inner[0].size(); }
  PerExampleState at(Eigen::Index i) const;
};

/// Builds states from inner products; throws DivergenceError on a non-finite loss.
ExampleStates states_from_inner_products(std::array<Eigen::VectorXd, 2> signal_inner,
                                         std::array<Eigen::MatrixXd, 2> noise_inner,
                                         const Eigen::VectorXd& labels, const Activation& a,
                                         std::int64_t step = 0);

ExampleStates evaluate_states(const Weights& w, const Dataset& data, const Activation& a,
                              std::int64_t step = 0);

/// grad[j][r] = (1/nm) sum_i l'_i j [sigma'(<w, y_i mu>) mu + sigma'(<w, xi_i>) y_i xi_i].
Weights gradient_from_states(const ExampleStates& states, const Dataset& data);

struct GradientResult {
  Weights grad;
  ExampleStates states;
  double train_loss;
};

GradientResult full_batch_gradient(const Weights& w, const Dataset& data, const Activation& a);

void check_shapes(const Weights& w, const Dataset& data);

}  // namespace dpgd
