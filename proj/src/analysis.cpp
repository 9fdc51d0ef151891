#include "dpgd/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "dpgd/errors.hpp"

namespace dpgd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr Eigen::Index kEvalChunk = 1024;

}  // namespace

TestMetrics evaluate_test_metrics(const Weights& w, const SignalSpec& signal,
                                  const NoiseSpec& noise, const Activation& a,
                                  const EvalConfig& cfg) {
  require(cfg.n_test >= 1, ErrorCode::empty_eval, "n_test must be at least 1");
  require(w.d() == signal.d(), ErrorCode::shape_mismatch, "weights and signal differ in d");
  a.validate();
  const Eigen::Index d = signal.d();
  const Eigen::Index m = w.m();
  std::array<Eigen::VectorXd, 2> signal_inner{w.banks[0] * signal.mu, w.banks[1] * signal.mu};

  double loss_sum = 0.0, loss_sq = 0.0, err_sum = 0.0, err_sq = 0.0;
  Eigen::MatrixXd xi(kEvalChunk, d);
  Eigen::VectorXd labels(kEvalChunk);
  for (std::int64_t start = 0; start < cfg.n_test; start += kEvalChunk) {
    const Eigen::Index count = std::min<Eigen::Index>(kEvalChunk, cfg.n_test - start);
    for (Eigen::Index k = 0; k < count; ++k) {
      Stream stream(cfg.seed, StreamTag::test_example, static_cast<std::uint64_t>(start + k));
      const Example ex = sample_example(signal, noise, stream);
      xi.row(k) = ex.xi.transpose();
      labels[k] = ex.label;
    }
    std::array<Eigen::MatrixXd, 2> noise_inner;
    for (std::size_t b = 0; b < 2; ++b) {
      noise_inner[b].noalias() = w.banks[b] * xi.topRows(count).transpose();
    }
    for (Eigen::Index k = 0; k < count; ++k) {
      std::array<double, 2> side{};
      for (std::size_t b = 0; b < 2; ++b) {
        double sum = 0.0;
        for (Eigen::Index r = 0; r < m; ++r) {
          sum += act_unchecked(labels[k] * signal_inner[b][r], a).value +
                 act_unchecked(noise_inner[b](r, k), a).value;
        }
        side[b] = sum / static_cast<double>(m);
      }
      const double margin = labels[k] * (side[0] - side[1]);
      const double loss = logistic_loss_unchecked(margin).value;
      double err = margin < 0.0 ? 1.0 : 0.0;
      if (margin == 0.0) err = cfg.tie_policy == TiePolicy::error ? 1.0 : 0.5;
      loss_sum += loss;
      loss_sq += loss * loss;
      err_sum += err;
      err_sq += err * err;
    }
  }
  const double n = static_cast<double>(cfg.n_test);
  const auto std_err = [n](double sum, double sq) {
    if (n < 2) return 0.0;
    const double mean = sum / n;
    const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1.0));
    return std::sqrt(var / n);
  };
  return {loss_sum / n, err_sum / n, std_err(loss_sum, loss_sq), std_err(err_sum, err_sq)};
}

double ProblemScales::snr_inverse() const {
  return sigma_p * std::sqrt(static_cast<double>(d)) / mu_norm;
}

double ProblemScales::noise_energy() const {
  return sigma_p * sigma_p * static_cast<double>(d);
}

double ConditionItem::rhs(double C) const { return rhs_base * std::pow(C, c_power); }

bool ConditionItem::holds(double C) const {
  const double bound = rhs(C);
  return relation == Relation::at_least ? lhs >= bound : lhs <= bound;
}

const ConditionItem& ConditionReport::item(const std::string& name) const {
  for (const auto& it : items) {
    if (it.name == name) return it;
  }
  throw Error(ErrorCode::invalid_input, "no condition item named " + name);
}

ConditionReport check_conditions(const ProblemScales& p, ConditionKind which,
                                 const std::vector<double>& c_values) {
  require(p.n > 0 && p.d > 0 && p.m > 0 && p.mu_norm > 0 && p.sigma_p > 0 && p.kappa > 0 &&
              p.eta > 0 && p.delta > 0 && p.horizon > 0 && p.q >= 3,
          ErrorCode::invalid_parameter, "condition check requires positive scales");
  const double n = static_cast<double>(p.n);
  const double d = static_cast<double>(p.d);
  const double m = static_cast<double>(p.m);
  const double q = static_cast<double>(p.q);
  const double mu2 = p.mu_norm * p.mu_norm;
  const double noise = p.noise_energy();
  const double hi = std::max(mu2, noise);
  const double lo = std::min(mu2, noise);
  const double log_t = std::log(p.horizon);
  const double delta = p.delta;

  ConditionReport report{which, c_values, {}};
  auto add = [&](std::string name, std::string formula, double lhs, double rhs_base, int power,
                 Relation rel) {
    ConditionItem item{std::move(name), std::move(formula), lhs, rhs_base, power, rel, {}, {}};
    for (double C : c_values) {
      item.rhs_at_C[C] = item.rhs(C);
      item.holds_at_C[C] = item.holds(C);
    }
    report.items.push_back(std::move(item));
  };

  const double sample_rhs = std::log(m / delta);
  const double width_rhs = std::log(n * p.horizon / delta);
  if (which == ConditionKind::condition1) {
    add("kappa_order", "kappa <= C", p.kappa, 1.0, 1, Relation::at_most);
    add("snr_small", "SNR^-1 >= C n^(1/q)", p.snr_inverse(), std::pow(n, 1.0 / q), 1,
        Relation::at_least);
    const double l1 = std::log(m * n * n / delta);
    add("dimension",
        "d >= C m^(2q/(q-2)) n^((2q-2)/(q-2)) kappa^(-(2q-2)/(q-2)) log^2(mn^2/delta) log^2(T*)",
        d,
        std::pow(m, 2 * q / (q - 2)) * std::pow(n, (2 * q - 2) / (q - 2)) *
            std::pow(p.kappa, -(2 * q - 2) / (q - 2)) * l1 * l1 * log_t * log_t,
        1, Relation::at_least);
    add("sample_size", "n >= C log(m/delta)", n, sample_rhs, 1, Relation::at_least);
    add("width", "m >= C log(n T*/delta)", m, width_rhs, 1, Relation::at_least);
    add("sigma0_lower", "sigma0 >= C n/(sigma_p d) sqrt(log(n^2/delta)) log(T*)", p.sigma0,
        n / (p.sigma_p * d) * std::sqrt(std::log(n * n / delta)) * log_t, 1, Relation::at_least);
    const double upper_den =
        std::max(p.mu_norm * std::pow(m, 2.0 / (q - 2)) * std::pow(n, 1.0 / (q - 2)) *
                     std::sqrt(std::log(m * n / delta)),
                 p.sigma_p * std::sqrt(d));
    add("sigma0_upper",
        "sigma0 <= (C max{|mu| m^(2/(q-2)) n^(1/(q-2)) sqrt(log(mn/delta)), sigma_p sqrt(d)})^-1 "
        "kappa^((q-1)/(q-2))",
        p.sigma0, std::pow(p.kappa, (q - 1) / (q - 2)) / upper_den, -1, Relation::at_most);
    add("eta_upper", "eta <= (C max{|mu|^2, sigma_p^2 d})^-1", p.eta, 1.0 / hi, -1,
        Relation::at_most);
  } else {
    add("kappa_small", "kappa^2 <= min{|mu|^2, sigma_p^2 d} / (C m^2 max{|mu|^2, sigma_p^2 d})",
        p.kappa * p.kappa, lo / (m * m * hi), -1, Relation::at_most);
    add("snr_vs_dimension", "SNR^-1 <= sqrt(d) / (C m^2)", p.snr_inverse(), std::sqrt(d) / (m * m),
        -1, Relation::at_most);
    add("snr_vs_samples", "SNR^-1 <= sqrt(n) / C", p.snr_inverse(), std::sqrt(n), -1,
        Relation::at_most);
    add("dimension", "d >= C max{m^4 n^2, m^2 n^2 / kappa^2 log(n^2/delta) log^2(T*)}", d,
        std::max(std::pow(m, 4) * n * n,
                 m * m * n * n / (p.kappa * p.kappa) * std::log(n * n / delta) * log_t * log_t),
        1, Relation::at_least);
    add("sample_size", "n >= C log(m/delta)", n, sample_rhs, 1, Relation::at_least);
    add("width", "m >= C log(n T~*/delta)", m, width_rhs, 1, Relation::at_least);
    add("sigma0_upper",
        "sigma0 <= min{1/(C m sigma_p sqrt(d)), kappa/(C max{|mu|, sigma_p sqrt(d)} "
        "sqrt(log(mn/delta)))}",
        p.sigma0,
        std::min(1.0 / (m * p.sigma_p * std::sqrt(d)),
                 p.kappa / (std::max(p.mu_norm, p.sigma_p * std::sqrt(d)) *
                            std::sqrt(std::log(m * n / delta)))),
        -1, Relation::at_most);
    add("eta_lower", "eta >= C m^3 kappa^2 max / (|mu|^2 min)", p.eta,
        m * m * m * p.kappa * p.kappa * hi / (mu2 * lo), 1, Relation::at_least);
    add("eta_upper", "eta <= m / (C |mu|^2)", p.eta, m / mu2, -1, Relation::at_most);
    const double lg = std::log(m * n * p.horizon / delta);
    add("sigma_b_upper",
        "sigma_b <= (C eta max{|mu|, sigma_p sqrt(d)} sqrt(T~*) log^2(mn T~*/delta))^-1",
        p.sigma_b,
        1.0 / (p.eta * std::max(p.mu_norm, p.sigma_p * std::sqrt(d)) * std::sqrt(p.horizon) *
               lg * lg),
        -1, Relation::at_most);
  }
  return report;
}

TimescaleReport compute_timescales(const ProblemScales& p,
                                   const std::map<std::string, double>& constants,
                                   double epsilon) {
  require(p.n > 0 && p.d > 0 && p.m > 0 && p.mu_norm > 0 && p.sigma_p > 0 && p.kappa > 0 &&
              p.eta > 0 && epsilon > 0,
          ErrorCode::invalid_parameter, "timescales require positive scales");
  TimescaleReport out{};
  out.epsilon = epsilon;
  for (const char* key : {"c_T1", "c_T_star", "c_T1_tilde", "c_T2_tilde", "c_T_star_tilde",
                          "c_T2_tilde_early_stop"}) {
    const auto it = constants.find(key);
    out.constants_used[key] = it == constants.end() ? 1.0 : it->second;
  }
  for (const auto& [key, value] : constants) {
    require(out.constants_used.count(key) == 1, ErrorCode::invalid_parameter,
            "unknown timescale constant " + key);
  }
  const auto c = [&](const char* key) { return out.constants_used.at(key); };

  const double n = static_cast<double>(p.n);
  const double m = static_cast<double>(p.m);
  const double mu2 = p.mu_norm * p.mu_norm;
  const double noise = p.noise_energy();
  const double hi = std::max(mu2, noise);
  const double lo = std::min(mu2, noise);

  if (p.sigma0 > 0.0) {
    const double t1 = c("c_T1") * std::pow(p.kappa, p.q - 1) * m * n /
                      (p.eta * std::pow(p.sigma0, p.q - 2) *
                       std::pow(p.sigma_p * std::sqrt(static_cast<double>(p.d)), p.q));
    out.T1 = t1;
    out.T2 = t1 + 36.0 * n * m * m / (p.eta * noise);
    out.T_star = t1 + c("c_T_star") * m * m * m * n / (p.eta * epsilon * mu2);
  }
  out.c1 = 3.0 * p.eta * std::max(n * mu2, noise) / (n * m);
  out.c2 = p.eta * hi / (12.0 * n * m * m);
  if (p.sigma_b > 0.0) {
    const double t1 =
        c("c_T1_tilde") * p.kappa * p.kappa / (p.eta * p.eta * p.sigma_b * p.sigma_b * lo);
    out.T1_tilde = t1;
    out.T2_tilde = t1 + c("c_T2_tilde") * std::exp(out.c1) * (t1 + 1.0 / out.c1);
    out.T_star_tilde = t1 + c("c_T_star_tilde") * n * m * m / (p.eta * epsilon * hi);
  }
  out.T2_tilde_early_stop = c("c_T2_tilde_early_stop") * m / (p.eta * mu2);
  out.signal_timescale = n * m / (p.eta * std::max(n * mu2, noise));
  return out;
}

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "FAIL";
    case CheckStatus::not_applicable: return "n/a";
  }
  return "?";
}

bool PreliminaryReport::all_pass() const {
  return std::none_of(items.begin(), items.end(),
                      [](const PreliminaryItem& i) { return i.status == CheckStatus::fail; });
}

const PreliminaryItem& PreliminaryReport::item(const std::string& name) const {
  for (const auto& it : items) {
    if (it.name == name) return it;
  }
  throw Error(ErrorCode::invalid_input, "no preliminary item named " + name);
}

PreliminaryReport verify_preliminaries(const Dataset& data, const Weights& w0, double sigma0,
                                       double delta) {
  check_shapes(w0, data);
  require(delta > 0.0 && delta < 1.0, ErrorCode::invalid_parameter, "delta must be in (0, 1)");
  const double n = static_cast<double>(data.n());
  const double d = static_cast<double>(data.d());
  const double m = static_cast<double>(w0.m());
  const double sp = data.noise().sigma_p;
  const double mu_norm = data.signal().norm();
  const Eigen::VectorXd& mu = data.signal().mu;

  PreliminaryReport report;
  auto range_item = [&](std::string name, double lo_obs, double hi_obs, double lower,
                        double upper, std::string note = {}) {
    const bool ok = lo_obs >= lower && hi_obs <= upper;
    report.items.push_back({std::move(name), ok ? CheckStatus::pass : CheckStatus::fail, lo_obs,
                            hi_obs, lower, upper, std::move(note)});
  };

  const Eigen::VectorXd& xi_sq = data.noise_norms_sq();
  range_item("xi_norm_sq", xi_sq.minCoeff(), xi_sq.maxCoeff(), sp * sp * d / 2,
             3 * sp * sp * d / 2);

  if (data.n() >= 2) {
    Eigen::MatrixXd gram = data.gram() ? *data.gram()
                                       : Eigen::MatrixXd(data.noise_matrix() *
                                                         data.noise_matrix().transpose());
    gram.diagonal().setZero();
    const double worst = gram.cwiseAbs().maxCoeff();
    range_item("xi_cross_inner", 0.0, worst, -kInf,
               2 * sp * sp * std::sqrt(d * std::log(6 * n * n / delta)));
  } else {
    report.items.push_back({"xi_cross_inner", CheckStatus::not_applicable, 0, 0, -kInf, kInf,
                            "needs at least two examples"});
  }

  // The projected sampler makes <xi_i, mu> vanish; check it to rounding.
  double worst_ratio = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double denom = mu_norm * std::sqrt(xi_sq[i]);
    worst_ratio = std::max(worst_ratio, denom > 0 ? std::abs(data[i].xi.dot(mu)) / denom : 0.0);
  }
  range_item("xi_mu_orthogonal", 0.0, worst_ratio, -kInf, 1e-10,
             "|<xi_i, mu>| / (|mu| |xi_i|)");

  double w_lo = kInf, w_hi = 0.0, sig_abs = 0.0, noi_abs = 0.0;
  double signal_max_min = kInf, noise_max_min = kInf;
  for (std::size_t b = 0; b < 2; ++b) {
    const double j = static_cast<double>(Weights::sign(b));
    const Eigen::VectorXd norms = w0.banks[b].rowwise().squaredNorm();
    w_lo = std::min(w_lo, norms.minCoeff());
    w_hi = std::max(w_hi, norms.maxCoeff());
    const Eigen::VectorXd sig = j * (w0.banks[b] * mu);
    sig_abs = std::max(sig_abs, sig.cwiseAbs().maxCoeff());
    signal_max_min = std::min(signal_max_min, sig.maxCoeff());
    const Eigen::MatrixXd noi = w0.banks[b] * data.noise_matrix().transpose();
    noi_abs = std::max(noi_abs, noi.cwiseAbs().maxCoeff());
    noise_max_min = std::min(noise_max_min, noi.colwise().maxCoeff().minCoeff());
  }
  if (sigma0 > 0.0) {
    range_item("w0_norm_sq", w_lo, w_hi, sigma0 * sigma0 * d / 2, 3 * sigma0 * sigma0 * d / 2);
  } else {
    report.items.push_back({"w0_norm_sq", CheckStatus::fail, w_lo, w_hi, 0.0, 0.0,
                            "degenerate zero initialization: lower bound cannot hold strictly"});
  }
  range_item("w0_signal_inner", 0.0, sig_abs, -kInf,
             sigma0 * mu_norm * std::sqrt(2 * std::log(12 * m / delta)));
  range_item("w0_noise_inner", 0.0, noi_abs, -kInf,
             2 * sigma0 * sp * std::sqrt(d) * std::sqrt(std::log(12 * m * n / delta)));
  range_item("w0_signal_max", signal_max_min, signal_max_min, sigma0 * mu_norm / 2, kInf,
             "min over j of max_r <w_{j,r}, j mu>");
  range_item("w0_noise_max", noise_max_min, noise_max_min, sigma0 * sp * std::sqrt(d) / 4, kInf,
             "min over (j, i) of max_r <w_{j,r}, xi_i>");

  const double pos = static_cast<double>(data.class_count(1));
  const double neg = static_cast<double>(data.class_count(-1));
  if (n >= 8 * std::log(4 / delta)) {
    range_item("class_balance", std::min(pos, neg), std::max(pos, neg), n / 4, 3 * n / 4);
  } else {
    report.items.push_back({"class_balance", CheckStatus::not_applicable, std::min(pos, neg),
                            std::max(pos, neg), n / 4, 3 * n / 4,
                            "n < 8 log(4/delta): balance event not guaranteed"});
  }
  return report;
}

}  // namespace dpgd
