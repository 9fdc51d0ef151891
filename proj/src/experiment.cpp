#include "dpgd/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "dpgd/analysis.hpp"
#include "dpgd/decomp.hpp"
#include "dpgd/errors.hpp"
#include "dpgd/io.hpp"
#include "dpgd/privacy.hpp"
#include "dpgd/svg.hpp"

namespace dpgd {

const char* const kVersion = "0.1.0";

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string sci(double v, int digits = 6) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json metrics_json(const MetricsRow& r) {
  return {{"step", r.step},
          {"train_loss", r.train_loss},
          {"test_loss", optional_json(r.test_loss)},
          {"test_error", optional_json(r.test_error)},
          {"test_acc", optional_json(r.test_acc)}};
}

void write_run_charts(const RunRecord& rec, const fs::path& dir) {
  Series train{"train loss", {}, {}, ""}, test{"test loss", {}, {}, ""};
  Series acc{"test accuracy", {}, {}, ""};
  Series gamma{"mean gamma", {}, {}, ""}, rpos{"mean rho_pos", {}, {}, ""},
      rneg{"mean rho_neg", {}, {}, ""};
  for (const auto& r : rec.metrics) {
    const double x = static_cast<double>(r.step);
    train.x.push_back(x);
    train.y.push_back(r.train_loss);
    if (r.test_loss) {
      test.x.push_back(x);
      test.y.push_back(*r.test_loss);
      acc.x.push_back(x);
      acc.y.push_back(*r.test_acc);
    }
    if (r.gamma_mean) {
      gamma.x.push_back(x);
      gamma.y.push_back(*r.gamma_mean);
      rpos.x.push_back(x);
      rpos.y.push_back(*r.rho_pos_mean);
      rneg.x.push_back(x);
      rneg.y.push_back(*r.rho_neg_mean);
    }
  }
  const std::string algo = to_string(rec.config.algo);
  std::vector<Series> losses{train};
  if (!test.x.empty()) losses.push_back(test);
  write_text(dir / "loss.svg",
             render_line_chart(losses, {algo + ": loss", "iteration", "loss", true}));
  if (!acc.x.empty()) {
    write_text(dir / "accuracy.svg",
               render_line_chart({acc}, {algo + ": test accuracy", "iteration", "accuracy"}));
  }
  if (!gamma.x.empty()) {
    write_text(dir / "coefficients.svg",
               render_line_chart({gamma, rpos, rneg},
                                 {algo + ": decomposition coefficients", "iteration", "mean"}));
  }
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg, const fs::path& dir) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();
  fs::create_directories(dir);
  write_text(dir / "config.cfg", to_config_text(cfg));

  const Dataset data = sample_dataset(cfg.n, cfg.signal(), cfg.noise(), cfg.data_seed);
  write_dataset(dir / "data.bin", data);

  RunOptions options;
  if (cfg.eval_enabled) options.eval = cfg.eval;
  RunOutcome out;
  out.dir = dir;
  out.record = run_training(data, cfg.m, cfg.activation, cfg.train, options);
  const RunRecord& rec = out.record;
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  std::vector<std::string> artifacts{"config.cfg", "data.bin", "init.bin", "metrics.csv"};
  write_weights(dir / "init.bin", rec.initial_weights);
  if (rec.final_weights) {
    write_weights(dir / "final.bin", *rec.final_weights);
    artifacts.push_back("final.bin");
  }
  if (rec.decomposition && rec.decomposition->noise_sum) {
    write_weights(dir / "noise_sum.bin", *rec.decomposition->noise_sum);
    artifacts.push_back("noise_sum.bin");
  }
  if (!rec.checkpoints.empty()) {
    fs::create_directories(dir / "checkpoints");
    for (const auto& [step, w] : rec.checkpoints) {
      char name[48];
      std::snprintf(name, sizeof name, "step_%08lld.bin", static_cast<long long>(step));
      write_weights(dir / "checkpoints" / name, w);
    }
    artifacts.push_back("checkpoints/");
  }
  write_metrics_csv(dir / "metrics.csv", rec.metrics);
  if (rec.decomposition) {
    write_decomposition_csv(dir / "decomposition.csv", rec.decomposition_trace);
    write_lambda_csv(dir / "lambda.csv", rec.lambda_trace);
    artifacts.push_back("decomposition.csv");
    artifacts.push_back("lambda.csv");
  }
  if (cfg.emit_svg) {
    write_run_charts(rec, dir);
    artifacts.push_back("loss.svg");
  }

  json manifest;
  manifest["version"] = kVersion;
  manifest["started_at"] = started_at;
  manifest["wall_clock_seconds"] = out.wall_seconds;
  manifest["config_text"] = to_config_text(cfg);
  manifest["config"] = {{"n", cfg.n},
                        {"d", cfg.d},
                        {"mu_norm", cfg.mu_norm},
                        {"sigma_p", cfg.sigma_p},
                        {"m", cfg.m},
                        {"kappa", cfg.activation.kappa},
                        {"q", cfg.activation.q},
                        {"eta", cfg.train.eta},
                        {"steps", cfg.train.steps},
                        {"sigma0", cfg.train.sigma0},
                        {"sigma_b", cfg.train.sigma_b},
                        {"algo", to_string(cfg.train.algo)},
                        {"mode", to_string(cfg.train.mode)},
                        {"eval_every", cfg.train.eval_every},
                        {"n_test", cfg.eval.n_test}};
  manifest["seeds"] = {{"data", cfg.data_seed},
                       {"init", rec.init_seed},
                       {"dp_noise", rec.noise_seed},
                       {"eval", cfg.eval.seed}};
  manifest["notes"] = rec.notes;
  manifest["artifacts"] = artifacts;
  if (!rec.metrics.empty()) manifest["final"] = metrics_json(rec.metrics.back());
  write_json(dir / "manifest.json", manifest);
  return out;
}

bool SweepOutcome::complete() const {
  for (const auto& c : cells) {
    if (!c.ok) return false;
  }
  return true;
}

std::vector<SweepCell> plan_sweep(const ExperimentConfig& base, const fs::path& out) {
  base.validate();
  if (!(base.train.sigma_b > 0)) {
    const auto it = base.key_lines.find("train.sigma_b");
    const int line = it == base.key_lines.end() ? 0 : it->second;
    throw ConfigError(line, "sweep includes dpgd cells: train.sigma_b must be positive");
  }
  std::vector<SweepCell> cells;
  for (std::size_t k = 0; k < base.sweep_sigma_p.size(); ++k) {
    for (Algorithm algo : {Algorithm::gd, Algorithm::dpgd}) {
      SweepCell cell;
      cell.sigma_index = k;
      cell.sigma_p = base.sweep_sigma_p[k];
      cell.algo = algo;
      cell.config = base;
      cell.config.sigma_p = cell.sigma_p;
      cell.config.train.algo = algo;
      cell.config.data_seed = derive_seed(base.data_seed, k);
      cell.config.train.seed = derive_seed(base.train.seed, k);
      cell.config.eval.seed = derive_seed(base.eval.seed, k);
      std::ostringstream name;
      name << "sigma_p_" << format_double(cell.sigma_p) << "_" << to_string(algo);
      cell.dir = out / name.str();
      cell.config.output_dir = cell.dir.string();
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

SweepOutcome figure1_sweep(const ExperimentConfig& base, const fs::path& out, int workers) {
  SweepOutcome result;
  result.cells = plan_sweep(base, out);
  fs::create_directories(out);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < result.cells.size(); k = next++) {
      SweepCell& cell = result.cells[k];
      try {
        RunOutcome run = run_experiment(cell.config, cell.dir);
        cell.final_metrics = run.record.metrics.back();
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(result.cells.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < n_workers; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<SweepRow> combined;
  for (const auto& cell : result.cells) {
    if (!cell.ok) continue;
    for (const auto& row : read_metrics_csv(cell.dir / "metrics.csv")) {
      combined.push_back({cell.sigma_p, cell.algo, row});
    }
  }
  write_sweep_csv(out / "figure1.csv", combined);

  if (base.emit_svg) {
    for (std::size_t k = 0; k < base.sweep_sigma_p.size(); ++k) {
      std::vector<Series> loss, acc;
      for (const auto& row : combined) {
        if (row.sigma_p != base.sweep_sigma_p[k] || !row.metrics.test_loss) continue;
        const std::string label = row.algo == Algorithm::gd ? "GD" : "DP-GD";
        auto find = [&](std::vector<Series>& v) -> Series& {
          for (auto& s : v) {
            if (s.label == label) return s;
          }
          v.push_back({label, {}, {}, row.algo == Algorithm::gd ? "#1f77b4" : "#d62728"});
          return v.back();
        };
        Series& l = find(loss);
        l.x.push_back(static_cast<double>(row.metrics.step));
        l.y.push_back(*row.metrics.test_loss);
        Series& a = find(acc);
        a.x.push_back(static_cast<double>(row.metrics.step));
        a.y.push_back(*row.metrics.test_acc);
      }
      const std::string tag = format_double(base.sweep_sigma_p[k]);
      write_text(out / ("figure1_loss_sigma_p_" + tag + ".svg"),
                 render_line_chart(loss, {"test loss, sigma_p = " + tag, "iteration",
                                          "test loss", true}));
      write_text(out / ("figure1_accuracy_sigma_p_" + tag + ".svg"),
                 render_line_chart(acc, {"test accuracy, sigma_p = " + tag, "iteration",
                                         "test accuracy"}));
    }
  }

  std::ostringstream table;
  table << std::left << std::setw(10) << "sigma_p" << std::setw(7) << "algo" << std::setw(14)
        << "train_loss" << std::setw(14) << "test_loss" << std::setw(10) << "test_acc"
        << "status\n";
  json summary = json::array();
  for (const auto& cell : result.cells) {
    table << std::setw(10) << format_double(cell.sigma_p) << std::setw(7) << to_string(cell.algo);
    json j = {{"sigma_p", cell.sigma_p}, {"algo", to_string(cell.algo)}, {"ok", cell.ok},
              {"dir", cell.dir.string()}};
    if (cell.ok) {
      const MetricsRow& m = *cell.final_metrics;
      table << std::setw(14) << sci(m.train_loss) << std::setw(14)
            << (m.test_loss ? sci(*m.test_loss) : "-") << std::setw(10)
            << (m.test_acc ? sci(*m.test_acc, 4) : "-") << "ok\n";
      j["final"] = metrics_json(m);
    } else {
      table << std::setw(14) << "-" << std::setw(14) << "-" << std::setw(10) << "-"
            << "FAILED: " << cell.error << "\n";
      j["error"] = cell.error;
    }
    summary.push_back(j);
  }
  write_text(out / "summary.txt", table.str());
  write_json(out / "summary.json", summary);
  return result;
}

Report privacy_report(const ExperimentConfig& cfg) {
  cfg.validate();
  MechanismParams p;
  p.n = cfg.n;
  p.m = cfg.m;
  p.T = cfg.train.steps;
  p.mu_norm = cfg.mu_norm;
  p.sigma_p = cfg.sigma_p;
  p.d = cfg.d;
  p.sigma_b = cfg.train.sigma_b;
  p.delta = cfg.privacy_delta;

  Report r;
  std::ostringstream os;
  const double delta_s = sensitivity(p.n, p.m, p.mu_norm, p.sigma_p, p.d);
  const double s4 = theorem4_sigma_b(cfg.train.eta, p.m, p.mu_norm, p.sigma_p, p.d, cfg.theorem4_c);
  os << "privacy accounting (n=" << p.n << ", m=" << p.m << ", d=" << p.d << ", T=" << p.T
     << ", sigma_b=" << sci(p.sigma_b) << ", delta=" << sci(p.delta) << ")\n";
  os << "  sensitivity Delta          " << sci(delta_s, 7) << "\n";
  r.json = {{"sensitivity", delta_s}, {"delta", p.delta}, {"theorem4_sigma_b", s4},
            {"caveat", kNoClippingCaveat}};
  if (!(p.sigma_b > 0)) {
    os << "  sigma_b = 0: privacy loss is unbounded (no guarantee)\n";
    r.json["bounds"] = nullptr;
  } else {
    for (BoundKind kind : {BoundKind::tight_sensitivity, BoundKind::paper_lemma}) {
      const double A = rdp_total(p, kind);
      const std::string name = to_string(kind);
      os << "  [" << name << "]\n";
      os << "    RDP slope A              " << sci(A, 7) << "\n";
      if (A > 0) {
        const DpGuarantee g = rdp_to_dp_optimal(A, p.delta, kind);
        os << "    lambda*                  " << sci(g.lambda_star, 7) << "\n";
        os << "    epsilon                  " << sci(g.epsilon, 7) << "\n";
        r.json["bounds"][name] = {{"rdp_slope", A},
                                  {"lambda_star", g.lambda_star},
                                  {"epsilon", g.epsilon},
                                  {"conditional_on_norm_event", g.conditional_on_norm_event}};
      } else {
        os << "    epsilon                  0 (no iterations)\n";
        r.json["bounds"][name] = {{"rdp_slope", A}, {"epsilon", 0.0}};
      }
    }
  }
  os << "  sigma_b at c=" << sci(cfg.theorem4_c) << " (early-stopping choice)  " << sci(s4) << "\n";
  os << kNoClippingCaveat << "\n";
  r.text = os.str();
  return r;
}

Report conditions_report(const ExperimentConfig& cfg) {
  cfg.validate();
  const ProblemScales p = cfg.scales();
  Report r;
  std::ostringstream os;
  os << "SNR^-1 = " << sci(p.snr_inverse()) << ", horizon T = " << sci(p.horizon)
     << ", delta = " << sci(p.delta) << "\n";
  for (ConditionKind kind : {ConditionKind::condition1, ConditionKind::condition2}) {
    const std::string title = kind == ConditionKind::condition1 ? "condition1" : "condition2";
    const ConditionReport rep = check_conditions(p, kind, cfg.c_values);
    os << "\n" << title << "\n";
    os << "  " << std::left << std::setw(18) << "item" << std::setw(14) << "lhs" << std::setw(4)
       << "rel";
    for (double C : cfg.c_values) os << std::setw(22) << ("rhs@C=" + sci(C, 3));
    os << "\n";
    json items = json::array();
    for (const auto& it : rep.items) {
      const std::string rel = it.relation == Relation::at_least ? ">=" : "<=";
      os << "  " << std::setw(18) << it.name << std::setw(14) << sci(it.lhs) << std::setw(4)
         << rel;
      json rhs = json::object(), holds = json::object();
      for (double C : cfg.c_values) {
        const bool ok = it.holds_at_C.at(C);
        os << std::setw(22) << (sci(it.rhs_at_C.at(C)) + (ok ? " ok" : " FAIL"));
        rhs[sci(C)] = it.rhs_at_C.at(C);
        holds[sci(C)] = ok;
      }
      os << "\n";
      items.push_back({{"name", it.name},
                       {"formula", it.formula},
                       {"lhs", it.lhs},
                       {"relation", rel},
                       {"rhs_at_C", rhs},
                       {"holds_at_C", holds}});
    }
    r.json[title] = items;
  }
  r.text = os.str();
  return r;
}

Report timescales_report(const ExperimentConfig& cfg) {
  cfg.validate();
  const ProblemScales p = cfg.scales();
  const TimescaleReport t = compute_timescales(p, cfg.timescale_constants, cfg.analysis_epsilon);
  Report r;
  std::ostringstream os;
  auto line = [&](const std::string& name, const std::optional<double>& v) {
    os << "  " << std::left << std::setw(22) << name << (v ? sci(*v) : "undefined") << "\n";
    r.json[name] = optional_json(v);
  };
  os << "timescales (steps; epsilon = " << sci(t.epsilon) << ")\n";
  line("T1", t.T1);
  line("T2", t.T2);
  line("T_star", t.T_star);
  line("T1_tilde", t.T1_tilde);
  line("T2_tilde", t.T2_tilde);
  line("T_star_tilde", t.T_star_tilde);
  line("T2_tilde_early_stop", t.T2_tilde_early_stop);
  line("signal_timescale", t.signal_timescale);
  line("c1", t.c1);
  line("c2", t.c2);
  os << "  constants:";
  for (const auto& [k, v] : t.constants_used) os << " " << k << "=" << sci(v);
  os << "\n";
  r.json["constants_used"] = t.constants_used;
  r.json["epsilon"] = t.epsilon;
  r.text = os.str();
  return r;
}

Report decompose_run(const fs::path& run_dir) {
  const ExperimentConfig cfg = parse_config(read_text(run_dir / "config.cfg"));
  require(fs::exists(run_dir / "final.bin"), ErrorCode::io,
          "no final.bin in " + run_dir.string() + " (kernel-mode runs keep no weights)");
  const Dataset data = read_dataset(run_dir / "data.bin");
  const Weights w0 = read_weights(run_dir / "init.bin");
  const Weights wt = read_weights(run_dir / "final.bin");
  std::optional<Weights> noise_sum;
  if (cfg.train.algo == Algorithm::dpgd) {
    require(fs::exists(run_dir / "noise_sum.bin"), ErrorCode::incomplete_trace,
            "DP-GD run has no noise_sum.bin; cannot separate the injected noise");
    noise_sum = read_weights(run_dir / "noise_sum.bin");
  }
  Recovery rec = recover_coefficients_lstsq(wt, w0, data, noise_sum ? &*noise_sum : nullptr,
                                            cfg.train.eta);
  rec.decomposition.step = cfg.train.steps;
  const auto rows = decomposition_rows(rec.decomposition);
  write_decomposition_csv(run_dir / "recovered_decomposition.csv", rows);
  write_lambda_csv(run_dir / "recovered_lambda.csv", lambda_rows(rec.decomposition));

  Report r;
  std::ostringstream os;
  os << "least-squares recovery at step " << cfg.train.steps << " (basis condition "
     << sci(rec.condition) << ")\n";
  const DecompositionSummary s = summarize(rec.decomposition);
  os << "  mean gamma " << sci(s.gamma_mean) << ", mean rho_pos " << sci(s.rho_pos_mean)
     << ", mean rho_neg " << sci(s.rho_neg_mean) << "\n";
  r.json = {{"step", cfg.train.steps},
            {"condition", rec.condition},
            {"gamma_mean", s.gamma_mean},
            {"rho_pos_mean", s.rho_pos_mean},
            {"rho_neg_mean", s.rho_neg_mean}};

  if (fs::exists(run_dir / "decomposition.csv")) {
    std::istringstream in(read_text(run_dir / "decomposition.csv"));
    std::string lineb;
    std::getline(in, lineb);
    std::map<std::pair<int, long>, std::array<double, 3>> tracked;
    while (std::getline(in, lineb)) {
      long long step = 0;
      int j = 0;
      long rr = 0;
      double g = 0, rp = 0, rn = 0;
      if (std::sscanf(lineb.c_str(), "%lld,%d,%ld,%lf,%lf,%lf", &step, &j, &rr, &g, &rp, &rn) ==
              6 &&
          step == cfg.train.steps) {
        tracked[{j, rr}] = {g, rp, rn};
      }
    }
    if (!tracked.empty()) {
      double worst = 0.0, scale = 0.0;
      for (const auto& row : rows) {
        const auto& t = tracked.at({row.j, static_cast<long>(row.r)});
        worst = std::max({worst, std::abs(row.gamma - t[0]), std::abs(row.rho_pos_sum - t[1]),
                          std::abs(row.rho_neg_sum - t[2])});
        scale = std::max({scale, std::abs(t[0]), std::abs(t[1]), std::abs(t[2])});
      }
      os << "  max |recovered - tracked| = " << sci(worst) << " (largest tracked magnitude "
         << sci(scale) << ")\n";
      r.json["max_abs_deviation_from_tracked"] = worst;
    }
  }
  r.text = os.str();
  return r;
}

}  // namespace dpgd
