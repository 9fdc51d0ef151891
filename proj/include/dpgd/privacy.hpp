#pragma once

#include <cstdint>
#include <string>

namespace dpgd {

struct MechanismParams {
  std::int64_t n = 1000;
  std::int64_t m = 100;
  std::int64_t T = 20000;
  double mu_norm = 1.0;
  double sigma_p = 0.5;
  std::int64_t d = 2000;
  double sigma_b = 0.01;
  double delta = 1e-5;

  void validate() const;
};

enum class BoundKind { tight_sensitivity, paper_lemma };
std::string to_string(BoundKind kind);

struct DpGuarantee {
  double epsilon;
  double delta;
  double lambda_star;
  double rdp_slope;  // total RDP at order lambda is rdp_slope * lambda
  BoundKind bound_kind;
  /// Always set: the sensitivity bound holds only on the event |xi_i|^2 <= 3 sigma_p^2 d / 2
  /// because the mechanism does not clip gradients.
  bool conditional_on_norm_event = true;

  /// Recomputes epsilon from the stored order, slope and delta.
  double epsilon_at_lambda_star() const;
};

extern const char* const kNoClippingCaveat;

/// l2-sensitivity of the full-batch gradient of one filter under the norm event.
double sensitivity(std::int64_t n, std::int64_t m, double mu_norm, double sigma_p, std::int64_t d);

/// Slope A of the composed RDP curve A * lambda.
double rdp_total(const MechanismParams& p, BoundKind kind);

/// Minimizes A lambda + log(2/delta)/(lambda - 1) over lambda > 1.
DpGuarantee rdp_to_dp_optimal(double rdp_slope, double delta,
                              BoundKind kind = BoundKind::tight_sensitivity);

DpGuarantee dp_guarantee(const MechanismParams& p, BoundKind kind);

/// c * sqrt(|mu|^2 / (eta m^3 max{|mu|^2, sigma_p^2 d})).
double theorem4_sigma_b(double eta, std::int64_t m, double mu_norm, double sigma_p, std::int64_t d,
                        double const_c = 1.0);

}  // namespace dpgd
