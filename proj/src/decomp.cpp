#include "dpgd/decomp.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "dpgd/errors.hpp"

namespace dpgd {

Decomposition Decomposition::zero(Eigen::Index m, const Eigen::VectorXd& labels, double eta,
                                  bool injected_noise, Eigen::Index d) {
  Decomposition dec;
  dec.eta = eta;
  dec.injected_noise = injected_noise;
  dec.labels = labels;
  const Eigen::Index n = labels.size();
  for (std::size_t b = 0; b < 2; ++b) {
    dec.gamma[b] = Eigen::VectorXd::Zero(m);
    dec.rho_pos[b] = Eigen::MatrixXd::Zero(m, n);
    dec.rho_neg[b] = Eigen::MatrixXd::Zero(m, n);
  }
  if (injected_noise) dec.noise_sum = Weights(m, d);
  dec.lambda = Eigen::VectorXd::Zero(n);
  return dec;
}

Eigen::VectorXd compute_lambda(const Decomposition& dec) {
  const Eigen::Index n = dec.n();
  const double m = static_cast<double>(dec.m());
  Eigen::VectorXd lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t b = Weights::bank_index(dec.labels[i] > 0 ? 1 : -1);
    lambda[i] = (dec.gamma[b].sum() + dec.rho_pos[b].col(i).sum()) / m;
  }
  return lambda;
}

Decomposition advance_coefficients(const Decomposition& prev, const ExampleStates& states,
                                   double eta, double mu_norm_sq,
                                   const Eigen::VectorXd& xi_norm_sq) {
  if (states.step != prev.step) {
    throw Error(ErrorCode::stale_state,
                "gradient states are from step " + std::to_string(states.step) +
                    " but the decomposition is at step " + std::to_string(prev.step));
  }
  const Eigen::Index m = prev.m();
  const Eigen::Index n = prev.n();
  require(states.m() == m && states.n() == n && xi_norm_sq.size() == n,
          ErrorCode::shape_mismatch, "decomposition and gradient states differ in shape");

  Decomposition next = prev;
  next.step = prev.step + 1;
  next.eta = eta;
  const double scale = eta / (static_cast<double>(n) * static_cast<double>(m));
  for (std::size_t b = 0; b < 2; ++b) {
    const double j = static_cast<double>(Weights::sign(b));
    // sum_i l'_i sigma'(<w, y_i mu>) <= 0, so the increment is >= 0.
    const Eigen::VectorXd signal_sum = states.act_deriv_signal[b] * states.loss_deriv;
    next.gamma[b] -= (scale * mu_norm_sq) * signal_sum;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double weight = -scale * states.loss_deriv[i] * xi_norm_sq[i];
      if (states.labels[i] == j) {
        next.rho_pos[b].col(i) += weight * states.act_deriv_noise[b].col(i);
      } else {
        next.rho_neg[b].col(i) -= weight * states.act_deriv_noise[b].col(i);
      }
    }
  }
  next.lambda = compute_lambda(next);
  return next;
}

void accumulate_noise(Decomposition& dec, const Weights& injected) {
  require(dec.noise_sum.has_value(), ErrorCode::incomplete_trace,
          "decomposition does not track injected noise");
  *dec.noise_sum += injected;
}

Reconstruction reconstruct_weights(const Weights& w0, const Decomposition& dec,
                                   const Dataset& data, const Weights* actual) {
  if (dec.injected_noise && !dec.noise_sum) {
    throw Error(ErrorCode::incomplete_trace,
                "decomposition of a noisy run has no accumulated noise; cannot reconstruct");
  }
  check_shapes(w0, data);
  require(dec.m() == w0.m() && dec.n() == data.n(), ErrorCode::shape_mismatch,
          "decomposition shape differs from weights/dataset");
  const Eigen::VectorXd& mu = data.signal().mu;
  const double mu_norm_sq = data.signal().norm_sq();
  const Eigen::VectorXd inv_xi_norm_sq = data.noise_norms_sq().cwiseInverse();

  Reconstruction out{w0, std::nullopt};
  for (std::size_t b = 0; b < 2; ++b) {
    const double j = static_cast<double>(Weights::sign(b));
    const Eigen::MatrixXd rho =
        (dec.rho_pos[b] + dec.rho_neg[b]) * inv_xi_norm_sq.asDiagonal();
    out.weights.banks[b].noalias() += (j / mu_norm_sq) * dec.gamma[b] * mu.transpose();
    out.weights.banks[b].noalias() += rho * data.noise_matrix();
    if (dec.noise_sum) out.weights.banks[b] -= dec.eta * dec.noise_sum->banks[b];
  }
  if (actual != nullptr) {
    const double denom = actual->norm();
    const double diff = (*actual - out.weights).norm();
    out.residual = denom > 0.0 ? diff / denom : diff;
  }
  return out;
}

Recovery recover_coefficients_lstsq(const Weights& w_t, const Weights& w0, const Dataset& data,
                                    const Weights* noise_sum, double eta, double max_condition) {
  check_shapes(w_t, data);
  check_shapes(w0, data);
  const Eigen::Index n = data.n();
  const Eigen::Index d = data.d();
  const Eigen::Index m = w_t.m();
  require(n + 1 <= d, ErrorCode::ill_conditioned,
          "least-squares recovery needs n + 1 <= d basis vectors");

  Eigen::MatrixXd basis(n + 1, d);
  basis.row(0) = data.signal().mu.transpose();
  basis.bottomRows(n) = data.noise_matrix();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n + 1, n + 1);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(basis);
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectrum(gram, Eigen::EigenvaluesOnly);
  const double lo = spectrum.eigenvalues().minCoeff();
  const double hi = spectrum.eigenvalues().maxCoeff();
  const double condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(condition <= max_condition)) throw IllConditionedError(condition);

  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    gram.diagonal().array() += 1e-12 * gram.diagonal().maxCoeff();
    llt.compute(gram);
    if (llt.info() != Eigen::Success) throw IllConditionedError(condition);
  }

  Recovery out;
  out.condition = condition;
  Decomposition& dec = out.decomposition;
  dec = Decomposition::zero(m, data.labels(), eta, noise_sum != nullptr, d);
  if (noise_sum != nullptr) dec.noise_sum = *noise_sum;

  const double mu_norm_sq = data.signal().norm_sq();
  const Eigen::VectorXd& xi_norm_sq = data.noise_norms_sq();
  for (std::size_t b = 0; b < 2; ++b) {
    const double j = static_cast<double>(Weights::sign(b));
    Eigen::MatrixXd displacement = w_t.banks[b] - w0.banks[b];
    if (noise_sum != nullptr) displacement += eta * noise_sum->banks[b];
    // Coefficients c solve G c = B v for every filter (columns of the rhs).
    const Eigen::MatrixXd coef = llt.solve(basis * displacement.transpose());
    dec.gamma[b] = j * mu_norm_sq * coef.row(0).transpose();
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double rho = coef(i + 1, r) * xi_norm_sq[i];
        if (rho >= 0.0) {
          dec.rho_pos[b](r, i) = rho;
        } else {
          dec.rho_neg[b](r, i) = rho;
        }
      }
    }
  }
  dec.lambda = compute_lambda(dec);
  return out;
}

std::vector<DecompositionRow> decomposition_rows(const Decomposition& dec) {
  std::vector<DecompositionRow> rows;
  rows.reserve(static_cast<std::size_t>(2 * dec.m()));
  for (std::size_t b = 0; b < 2; ++b) {
    for (Eigen::Index r = 0; r < dec.m(); ++r) {
      rows.push_back({dec.step, Weights::sign(b), r, dec.gamma[b][r], dec.rho_pos[b].row(r).sum(),
                      dec.rho_neg[b].row(r).sum()});
    }
  }
  return rows;
}

std::vector<LambdaRow> lambda_rows(const Decomposition& dec) {
  std::vector<LambdaRow> rows;
  rows.reserve(static_cast<std::size_t>(dec.n()));
  for (Eigen::Index i = 0; i < dec.n(); ++i) rows.push_back({dec.step, i, dec.lambda[i]});
  return rows;
}

DecompositionSummary summarize(const Decomposition& dec) {
  double gamma = 0.0, pos = 0.0, neg = 0.0;
  std::int64_t pos_count = 0, neg_count = 0;
  for (std::size_t b = 0; b < 2; ++b) {
    const double j = static_cast<double>(Weights::sign(b));
    gamma += dec.gamma[b].sum();
    for (Eigen::Index i = 0; i < dec.n(); ++i) {
      if (dec.labels[i] == j) {
        pos += dec.rho_pos[b].col(i).sum();
        pos_count += dec.m();
      } else {
        neg += dec.rho_neg[b].col(i).sum();
        neg_count += dec.m();
      }
    }
  }
  return {gamma / static_cast<double>(2 * dec.m()),
          pos_count > 0 ? pos / static_cast<double>(pos_count) : 0.0,
          neg_count > 0 ? neg / static_cast<double>(neg_count) : 0.0};
}

}  // namespace dpgd
