#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "dpgd/data.hpp"
#include "dpgd/model.hpp"

namespace dpgd {

/*
 * Signal-noise decomposition of every filter:
 *
 *   w_{j,r}(t) = w_{j,r}(0) + j gamma_{j,r} mu / |mu|^2
 *              + sum_i (rho_pos + rho_neg)_{j,r,i} xi_i / |xi_i|^2 - eta sum_k b_{j,r,k}
 *
 * rho_pos is non-zero only where y_i = j, rho_neg only where y_i = -j.
 * noise_sum holds sum_k b_{j,r,k} (not scaled by eta) for noisy runs.
 */
struct Decomposition {
  std::int64_t step = 0;
  double eta = 0.0;
  bool injected_noise = false;
  Eigen::VectorXd labels;
  std::array<Eigen::VectorXd, 2> gamma;    // m
  std::array<Eigen::MatrixXd, 2> rho_pos;  // m x n
  std::array<Eigen::MatrixXd, 2> rho_neg;  // m x n
  std::optional<Weights> noise_sum;
  Eigen::VectorXd lambda;                  // n

  Eigen::Index m() const { return gamma[0].size(); }
  Eigen::Index n() const { return labels.size(); }

  static Decomposition zero(Eigen::Index m, const Eigen::VectorXd& labels, double eta,
                            bool injected_noise, Eigen::Index d);
};

/// lambda_i = (1/m) sum_r (gamma_{y_i,r} + rho_pos_{y_i,r,i}).
Eigen::VectorXd compute_lambda(const Decomposition& dec);

/// One step of the coefficient recurrences; `states` must come from the same step as `prev`.
Decomposition advance_coefficients(const Decomposition& prev, const ExampleStates& states,
                                   double eta, double mu_norm_sq,
                                   const Eigen::VectorXd& xi_norm_sq);

/// Adds one step of injected noise b_{j,r,t} to the running sum.
void accumulate_noise(Decomposition& dec, const Weights& injected);

struct Reconstruction {
  Weights weights;
  /// |W_actual - W_hat|_F / |W_actual|_F; empty when no reference was supplied.
  std::optional<double> residual;
};

Reconstruction reconstruct_weights(const Weights& w0, const Decomposition& dec,
                                   const Dataset& data, const Weights* actual = nullptr);

struct Recovery {
  Decomposition decomposition;
  double condition = 0.0;
};

/*
 * Least-squares projection of (w_t - w0 + eta * noise_sum) onto span{mu, xi_1..xi_n}
 * for every filter, via the (n+1)-dimensional normal equations. Each xi-coefficient
 * is split into rho_pos / rho_neg by sign.
 */
Recovery recover_coefficients_lstsq(const Weights& w_t, const Weights& w0, const Dataset& data,
                                    const Weights* noise_sum = nullptr, double eta = 0.0,
                                    double max_condition = 1e12);

struct DecompositionRow {
  std::int64_t step;
  int j;
  Eigen::Index r;
  double gamma;
  double rho_pos_sum;
  double rho_neg_sum;
};

struct LambdaRow {
  std::int64_t step;
  Eigen::Index i;
  double lambda;
};

std::vector<DecompositionRow> decomposition_rows(const Decomposition& dec);
std::vector<LambdaRow> lambda_rows(const Decomposition& dec);

struct DecompositionSummary {
  double gamma_mean;
  double rho_pos_mean;  // over (j, r, i) with y_i = j
  double rho_neg_mean;  // over (j, r, i) with y_i = -j
};

DecompositionSummary summarize(const Decomposition& dec);

}  // namespace dpgd
