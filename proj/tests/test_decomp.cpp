#include <doctest.h>

#include <cmath>

#include "dpgd/analysis.hpp"
#include "dpgd/decomp.hpp"
#include "dpgd/errors.hpp"
#include "dpgd/train.hpp"

using namespace dpgd;

namespace {

Dataset small_data(std::uint64_t seed, double sigma_p = 0.1) {
  return sample_dataset(32, SignalSpec::along_first_axis(64, 1.0), NoiseSpec{sigma_p}, seed);
}

double coefficient_gap(const Decomposition& a, const Decomposition& b) {
  double gap = 0;
  for (std::size_t k = 0; k < 2; ++k) {
    gap = std::max(gap, (a.gamma[k] - b.gamma[k]).cwiseAbs().maxCoeff());
    gap = std::max(gap, (a.rho_pos[k] - b.rho_pos[k]).cwiseAbs().maxCoeff());
    gap = std::max(gap, (a.rho_neg[k] - b.rho_neg[k]).cwiseAbs().maxCoeff());
  }
  return gap;
}

}  // namespace

TEST_CASE("coefficients start at zero and reconstruct the init") {
  const Dataset data = small_data(1);
  const Weights w0 = init_weights(8, 64, 0.1, 1);
  const Decomposition dec = Decomposition::zero(8, data.labels(), 0.1, false, 64);
  CHECK(dec.gamma[0].squaredNorm() == 0.0);
  CHECK(dec.rho_pos[1].squaredNorm() == 0.0);
  const Reconstruction r = reconstruct_weights(w0, dec, data, &w0);
  CHECK(r.weights == w0);
  CHECK(*r.residual == 0.0);
  CHECK(!reconstruct_weights(w0, dec, data).residual);
}

TEST_CASE("one hand step of the recurrences") {
  const Activation a{0.5, 3};
  const SignalSpec s = SignalSpec::along_first_axis(2, 1.0);
  std::vector<Example> ex{make_example(s, 1, PatchSlot::first, Eigen::Vector2d(0, 0.25))};
  const Dataset data(std::move(ex), s, NoiseSpec{1.0}, 0);
  Weights w(1, 2);
  w.banks[0](0, 0) = 0.25;
  const double eta = 0.3;
  const auto states = evaluate_states(w, data, a, 0);
  const Decomposition next = advance_coefficients(
      Decomposition::zero(1, data.labels(), eta, false, 2), states, eta, 1.0, data.noise_norms_sq());
  const double lp = -1.0 / (1.0 + std::exp(1.0 / 48.0));
  CHECK(next.gamma[0][0] == doctest::Approx(-eta * lp * 0.25 * 1.0).epsilon(1e-14));
  CHECK(next.gamma[1][0] == 0.0);
  // sigma'(<w, xi>) = sigma'(0) = 0, so no memorization yet.
  CHECK(next.rho_pos[0](0, 0) == 0.0);
  CHECK(next.step == 1);
}

TEST_CASE("stale states are rejected") {
  const Dataset data = small_data(2);
  const auto states = evaluate_states(init_weights(8, 64, 0.1, 2), data, Activation{}, 3);
  try {
    advance_coefficients(Decomposition::zero(8, data.labels(), 0.1, false, 64), states, 0.1, 1.0,
                         data.noise_norms_sq());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::stale_state);
  }
}

TEST_CASE("gd trace reconstructs, is monotone and keeps its zero pattern") {
  const Dataset data = small_data(3, 0.3);
  TrainConfig cfg;
  cfg.steps = 100;
  cfg.eval_every = 100;
  cfg.sigma0 = 0.05;
  cfg.seed = 3;
  std::optional<Decomposition> prev;
  int violations = 0, pattern = 0;
  RunOptions opts;
  opts.observer = [&](const StepView& v) {
    const Decomposition& d = *v.decomposition;
    for (std::size_t b = 0; b < 2; ++b) {
      const int j = Weights::sign(b);
      for (Eigen::Index i = 0; i < d.n(); ++i) {
        const bool own = static_cast<int>(d.labels[i]) == j;
        for (Eigen::Index r = 0; r < d.m(); ++r) {
          if ((!own && d.rho_pos[b](r, i) != 0.0) || (own && d.rho_neg[b](r, i) != 0.0)) ++pattern;
        }
      }
      if (prev) {
        violations += ((d.gamma[b] - prev->gamma[b]).array() < 0).count();
        violations += ((d.rho_pos[b] - prev->rho_pos[b]).array() < 0).count();
        violations += ((d.rho_neg[b] - prev->rho_neg[b]).array() > 0).count();
      }
    }
    prev = d;
  };
  const RunRecord rec = run_training(data, 8, Activation{}, cfg, opts);
  CHECK(violations == 0);
  CHECK(pattern == 0);
  const auto r = reconstruct_weights(rec.initial_weights, *rec.decomposition, data, &*rec.final_weights);
  CHECK(*r.residual <= 1e-8);

  const Recovery rc = recover_coefficients_lstsq(*rec.final_weights, rec.initial_weights, data);
  CHECK(coefficient_gap(rc.decomposition, *rec.decomposition) <= 1e-6);

  const Recovery exact = recover_coefficients_lstsq(r.weights, rec.initial_weights, data);
  CHECK(coefficient_gap(exact.decomposition, *rec.decomposition) <= 1e-8);

  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const std::size_t b = Weights::bank_index(static_cast<int>(data.labels()[i]));
    const double expected =
        (rec.decomposition->gamma[b].sum() + rec.decomposition->rho_pos[b].col(i).sum()) / 8.0;
    CHECK(rec.decomposition->lambda[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("dpgd trace reconstructs with the logged noise") {
  const Dataset data = small_data(4, 0.3);
  TrainConfig cfg;
  cfg.steps = 100;
  cfg.sigma0 = 0.05;
  cfg.seed = 4;
  cfg.algo = Algorithm::dpgd;
  cfg.sigma_b = 0.05;
  const RunRecord rec = run_training(data, 8, Activation{}, cfg);
  REQUIRE(rec.decomposition->noise_sum.has_value());
  const auto r = reconstruct_weights(rec.initial_weights, *rec.decomposition, data, &*rec.final_weights);
  CHECK(*r.residual <= 1e-6);

  const Recovery rc = recover_coefficients_lstsq(*rec.final_weights, rec.initial_weights, data,
                                                 &*rec.decomposition->noise_sum, cfg.eta);
  CHECK(coefficient_gap(rc.decomposition, *rec.decomposition) <= 1e-6);

  Decomposition missing = *rec.decomposition;
  missing.noise_sum.reset();
  try {
    reconstruct_weights(rec.initial_weights, missing, data);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::incomplete_trace);
  }
}

TEST_CASE("least squares recovery edge cases") {
  const Dataset data = small_data(5);
  const Weights w0 = init_weights(8, 64, 0.1, 5);
  const Recovery zero = recover_coefficients_lstsq(w0, w0, data);
  CHECK(zero.decomposition.gamma[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.decomposition.rho_pos[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.condition >= 1.0);

  std::vector<Example> dup{data[0], data[0], data[1]};
  const Dataset degenerate(std::move(dup), data.signal(), data.noise(), 0);
  const Weights wd = init_weights(8, 64, 0.1, 6);
  CHECK_THROWS_AS(recover_coefficients_lstsq(wd, w0, degenerate), IllConditionedError);

  const Dataset wide = sample_dataset(10, SignalSpec::along_first_axis(8, 1.0), NoiseSpec{1.0}, 1);
  CHECK_THROWS_AS(recover_coefficients_lstsq(init_weights(2, 8, 0.1, 1), init_weights(2, 8, 0.1, 2), wide),
                  Error);
}

TEST_CASE("out-of-span perturbations move the coefficients boundedly") {
  const Dataset data = sample_dataset(16, SignalSpec::along_first_axis(64, 1.0), NoiseSpec{0.3}, 7);
  const Weights w0 = init_weights(4, 64, 0.1, 7);
  Weights wt = init_weights(4, 64, 0.1, 8);
  const Recovery base = recover_coefficients_lstsq(wt, w0, data);
  Weights bump = init_weights(4, 64, 1e-6, 9);
  wt += bump;
  const Recovery moved = recover_coefficients_lstsq(wt, w0, data);
  const double gap = coefficient_gap(base.decomposition, moved.decomposition);
  MESSAGE("coefficient change " << gap << " for perturbation norm " << bump.norm());
  CHECK(std::isfinite(gap));
}

TEST_CASE("small-snr regimes: memorization under gd, signal learning under dpgd") {
  const Dataset data = sample_dataset(200, SignalSpec::along_first_axis(400, 1.0), NoiseSpec{0.5}, 21);
  const Activation a;
  TrainConfig cfg;
  cfg.steps = 4000;
  cfg.eval_every = 4000;
  cfg.seed = 21;
  cfg.mode = TrainMode::kernel;
  const RunRecord gd = run_training(data, 20, a, cfg);
  const Decomposition& g = *gd.decomposition;
  double max_gamma = 0, max_rho = 0;
  for (std::size_t b = 0; b < 2; ++b) {
    max_gamma = std::max(max_gamma, g.gamma[b].maxCoeff());
    max_rho = std::max(max_rho, g.rho_pos[b].maxCoeff());
  }
  CHECK(max_gamma < max_rho);

  ProblemScales p;
  p.n = 200;
  p.d = 400;
  p.m = 20;
  p.sigma_p = 0.5;
  p.eta = cfg.eta;
  // Theta-constant 5 on the early-stopping scale: at constant 1 (200 steps) the mean
  // gamma is still below the init scale.
  const auto ts = compute_timescales(p);
  cfg.steps = static_cast<std::int64_t>(std::ceil(5 * ts.signal_timescale));
  cfg.eval_every = cfg.steps;
  cfg.algo = Algorithm::dpgd;
  cfg.sigma_b = 0.01;
  const RunRecord dp = run_training(data, 20, a, cfg);
  const double init_scale = cfg.sigma0 * data.signal().norm();
  CHECK(summarize(*dp.decomposition).gamma_mean >= 10 * init_scale);
}
