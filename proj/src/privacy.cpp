#include "dpgd/privacy.hpp"

#include <algorithm>
#include <cmath>

#include "dpgd/errors.hpp"

namespace dpgd {

const char* const kNoClippingCaveat =
    "caveat: DP-GD does not clip gradients; the guarantee assumes |xi_i|^2 <= 3 sigma_p^2 d / 2 "
    "for every example (holds with probability >= 1 - delta/2)";

void MechanismParams::validate() const {
  require(n > 0 && m > 0 && d > 0 && T >= 0, ErrorCode::invalid_parameter,
          "n, m, d must be positive and T non-negative");
  require(mu_norm > 0 && sigma_p >= 0, ErrorCode::invalid_parameter,
          "mu_norm must be positive and sigma_p non-negative");
  require(delta > 0 && delta < 1, ErrorCode::invalid_parameter, "delta must be in (0, 1)");
  if (sigma_b <= 0.0) {
    throw Error(ErrorCode::infinite_privacy_loss, "sigma_b = 0: privacy loss is unbounded");
  }
}

std::string to_string(BoundKind kind) {
  return kind == BoundKind::tight_sensitivity ? "tight_sensitivity" : "paper_lemma";
}

double DpGuarantee::epsilon_at_lambda_star() const {
  return rdp_slope * lambda_star + std::log(2.0 / delta) / (lambda_star - 1.0);
}

double sensitivity(std::int64_t n, std::int64_t m, double mu_norm, double sigma_p,
                   std::int64_t d) {
  require(n > 0 && m > 0 && d > 0 && mu_norm > 0 && sigma_p >= 0, ErrorCode::invalid_parameter,
          "sensitivity requires positive scales");
  const double noise = std::sqrt(1.5 * sigma_p * sigma_p * static_cast<double>(d));
  return (mu_norm + noise) / (static_cast<double>(n) * static_cast<double>(m));
}

double rdp_total(const MechanismParams& p, BoundKind kind) {
  p.validate();
  const double T = static_cast<double>(p.T);
  const double m = static_cast<double>(p.m);
  const double sb2 = p.sigma_b * p.sigma_b;
  if (kind == BoundKind::tight_sensitivity) {
    const double delta_s = sensitivity(p.n, p.m, p.mu_norm, p.sigma_p, p.d);
    return T * m * delta_s * delta_s / sb2;
  }
  const double n = static_cast<double>(p.n);
  const double num =
      2.0 * p.mu_norm * p.mu_norm + 3.0 * p.sigma_p * p.sigma_p * static_cast<double>(p.d);
  return T * num / (sb2 * n * n * m);
}

DpGuarantee rdp_to_dp_optimal(double rdp_slope, double delta, BoundKind kind) {
  require(rdp_slope > 0.0 && std::isfinite(rdp_slope), ErrorCode::invalid_parameter,
          "RDP slope must be positive");
  require(delta > 0 && delta < 1, ErrorCode::invalid_parameter, "delta must be in (0, 1)");
  const double L = std::log(2.0 / delta);
  const double lambda_star = 1.0 + std::sqrt(L / rdp_slope);
  const double eps = rdp_slope + 2.0 * std::sqrt(rdp_slope * L);
  return {eps, delta, lambda_star, rdp_slope, kind, true};
}

DpGuarantee dp_guarantee(const MechanismParams& p, BoundKind kind) {
  return rdp_to_dp_optimal(rdp_total(p, kind), p.delta, kind);
}

double theorem4_sigma_b(double eta, std::int64_t m, double mu_norm, double sigma_p,
                        std::int64_t d, double const_c) {
  require(eta > 0 && m > 0 && mu_norm > 0 && sigma_p >= 0 && d > 0 && const_c > 0,
          ErrorCode::invalid_parameter, "theorem4_sigma_b requires positive inputs");
  const double mu2 = mu_norm * mu_norm;
  const double hi = std::max(mu2, sigma_p * sigma_p * static_cast<double>(d));
  const double mm = static_cast<double>(m);
  return const_c * std::sqrt(mu2 / (eta * mm * mm * mm * hi));
}

}  // namespace dpgd
