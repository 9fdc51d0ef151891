#include <doctest.h>

#include <cmath>

#include "dpgd/analysis.hpp"
#include "dpgd/errors.hpp"
#include "dpgd/privacy.hpp"
#include "dpgd/train.hpp"

using namespace dpgd;

namespace {

ProblemScales paper_scales(double sigma_p = 0.5) {
  ProblemScales p;
  p.sigma_p = sigma_p;
  return p;
}

}  // namespace

TEST_CASE("test metrics of the zero model") {
  const auto s = SignalSpec::along_first_axis(50, 1.0);
  EvalConfig cfg{500, 3, TiePolicy::error, 0};
  TestMetrics t = evaluate_test_metrics(Weights(4, 50), s, NoiseSpec{0.5}, Activation{}, cfg);
  CHECK(t.test_loss == doctest::Approx(std::log(2.0)));
  CHECK(t.test_error == 1.0);
  CHECK(t.std_err_error == 0.0);
  cfg.tie_policy = TiePolicy::half;
  t = evaluate_test_metrics(Weights(4, 50), s, NoiseSpec{0.5}, Activation{}, cfg);
  CHECK(t.test_error == 0.5);
}

TEST_CASE("test metrics of the perfect signal model") {
  const auto s = SignalSpec::along_first_axis(60, 2.0);
  const Activation a{0.5, 3};
  Weights w(5, 60);
  const double c = 0.8;
  for (Eigen::Index r = 0; r < 5; ++r) {
    w.banks[0].row(r) = (c * s.mu / s.norm_sq()).transpose();
    w.banks[1].row(r) = (-c * s.mu / s.norm_sq()).transpose();
  }
  const TestMetrics t =
      evaluate_test_metrics(w, s, NoiseSpec{1.0}, a, EvalConfig{3000, 4, TiePolicy::error, 0});
  CHECK(t.test_error == 0.0);
}

TEST_CASE("test metrics are reproducible and chunk-independent") {
  const auto s = SignalSpec::along_first_axis(30, 1.0);
  const Weights w = init_weights(3, 30, 0.5, 1);
  const EvalConfig cfg{2500, 9, TiePolicy::error, 0};
  const TestMetrics a = evaluate_test_metrics(w, s, NoiseSpec{0.5}, Activation{}, cfg);
  const TestMetrics b = evaluate_test_metrics(w, s, NoiseSpec{0.5}, Activation{}, cfg);
  CHECK(a.test_loss == b.test_loss);
  CHECK(a.test_error == b.test_error);
  CHECK(a.std_err_error > 0.0);

  try {
    evaluate_test_metrics(w, s, NoiseSpec{0.5}, Activation{}, EvalConfig{0, 1, TiePolicy::error, 0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_eval);
  }
}

TEST_CASE("condition items at the reference configuration") {
  const auto c2 = check_conditions(paper_scales(0.5), ConditionKind::condition2, {1.0, 2.0});
  const auto& item = c2.item("snr_vs_samples");
  CHECK(item.lhs == doctest::Approx(22.36).epsilon(1e-3));
  CHECK(item.rhs(1.0) == doctest::Approx(31.62).epsilon(1e-3));
  CHECK(item.holds_at_C.at(1.0));
  CHECK(!item.holds_at_C.at(2.0));

  const auto c1 = check_conditions(paper_scales(0.1), ConditionKind::condition1, {1.0});
  const auto& snr = c1.item("snr_small");
  CHECK(snr.lhs == doctest::Approx(4.47).epsilon(1e-3));
  CHECK(snr.rhs(1.0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(!snr.holds_at_C.at(1.0));

  for (const auto& it : c1.items) {
    CHECK(std::isfinite(it.lhs));
    CHECK(std::isfinite(it.rhs(1.0)));
  }
}

TEST_CASE("condition reports are monotone in C") {
  const std::vector<double> cs{1e-6, 0.01, 0.1, 0.5, 1, 2, 10, 1e3, 1e6};
  for (double sp : {0.1, 0.3, 0.5}) {
    for (ConditionKind kind : {ConditionKind::condition1, ConditionKind::condition2}) {
      const auto rep = check_conditions(paper_scales(sp), kind, cs);
      for (const auto& it : rep.items) {
        for (std::size_t k = 1; k < cs.size(); ++k) {
          const bool larger = it.holds_at_C.at(cs[k]);
          const bool smaller = it.holds_at_C.at(cs[k - 1]);
          if (it.c_power > 0 && it.relation == Relation::at_least) CHECK((!larger || smaller));
          if (it.c_power < 0 && it.relation == Relation::at_most) CHECK((!larger || smaller));
        }
        if (it.relation == Relation::at_least && it.c_power > 0) {
          CHECK(it.rhs(1e-12) < 1e-12 * it.rhs(1.0) * 10);
        }
      }
    }
  }
}

TEST_CASE("timescales") {
  ProblemScales p = paper_scales(0.5);
  p.sigma_b = theorem4_sigma_b(p.eta, p.m, p.mu_norm, p.sigma_p, p.d);
  const TimescaleReport t = compute_timescales(p);
  CHECK(*t.T2 - *t.T1 == doctest::Approx(7.2e6).epsilon(1e-9));
  CHECK(t.T2_tilde_early_stop == doctest::Approx(1000.0));
  CHECK(t.signal_timescale == doctest::Approx(1000.0));
  CHECK(*t.T2 >= *t.T1);
  CHECK(*t.T2_tilde >= *t.T1_tilde);
  CHECK(t.c1 == doctest::Approx(3 * 0.1 * 1000 / 1e5));
  CHECK(t.constants_used.at("c_T1") == 1.0);

  ProblemScales fast = p;
  fast.eta *= 2;
  const TimescaleReport t2 = compute_timescales(fast);
  CHECK((*t2.T2 - *t2.T1) == doctest::Approx((*t.T2 - *t.T1) / 2).epsilon(1e-14));

  ProblemScales loud = p;
  loud.sigma_b = 1e12;
  CHECK(*compute_timescales(loud).T1_tilde < 1e-20);

  ProblemScales silent = p;
  silent.sigma_b = 0.0;
  const TimescaleReport none = compute_timescales(silent);
  CHECK(!none.T1_tilde);
  CHECK(!none.T2_tilde);
  CHECK(none.T1);

  const TimescaleReport scaled = compute_timescales(p, {{"c_T1", 3.0}});
  CHECK(*scaled.T1 == doctest::Approx(3 * *t.T1));
  CHECK_THROWS_AS(compute_timescales(p, {{"c_bogus", 1.0}}), Error);
}

TEST_CASE("preliminaries at paper data scale") {
  const auto s = SignalSpec::along_first_axis(2000, 1.0);
  const Dataset data = sample_dataset(1000, s, NoiseSpec{0.5}, 31);
  const Weights w0 = init_weights(100, 2000, 0.01, 31);
  const PreliminaryReport r = verify_preliminaries(data, w0, 0.01, 0.01);
  for (const auto& it : r.items) {
    INFO(it.name << " [" << it.observed_min << ", " << it.observed_max << "] vs [" << it.lower
                 << ", " << it.upper << "]");
    CHECK(it.status == CheckStatus::pass);
  }
  CHECK(r.all_pass());
}

TEST_CASE("preliminaries degenerate cases") {
  const auto s = SignalSpec::along_first_axis(40, 1.0);
  const Dataset one = sample_dataset(1, s, NoiseSpec{0.5}, 1);
  const PreliminaryReport r1 = verify_preliminaries(one, init_weights(4, 40, 0.1, 1), 0.1, 0.01);
  CHECK(r1.item("class_balance").status == CheckStatus::not_applicable);

  const Dataset data = sample_dataset(50, s, NoiseSpec{0.5}, 2);
  const PreliminaryReport r0 = verify_preliminaries(data, Weights(4, 40), 0.0, 0.01);
  CHECK(r0.item("w0_norm_sq").status == CheckStatus::fail);
  CHECK(!r0.all_pass());
}
