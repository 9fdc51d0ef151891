#include "dpgd/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "dpgd/errors.hpp"

namespace dpgd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, int line, const std::string& key) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(line, "line " + std::to_string(line) + ": " + key +
                                ": expected a number, got '" + v + "'");
  }
  return out;
}

std::int64_t parse_int(const std::string& v, int line, const std::string& key) {
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(line, "line " + std::to_string(line) + ": " + key +
                                ": expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& v, int line, const std::string& key) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(line, "line " + std::to_string(line) + ": " + key +
                                ": expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& v, int line, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(line, "line " + std::to_string(line) + ": " + key +
                              ": expected true or false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& v, int line, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), line, key));
  if (out.empty()) {
    throw ConfigError(line, "line " + std::to_string(line) + ": " + key + ": empty list");
  }
  return out;
}

template <typename Enum>
Enum parse_enum(const std::string& v, int line, const std::string& key,
                const std::map<std::string, Enum>& names) {
  const auto it = names.find(v);
  if (it != names.end()) return it->second;
  std::string allowed;
  for (const auto& [name, value] : names) allowed += (allowed.empty() ? "" : ", ") + name;
  throw ConfigError(line, "line " + std::to_string(line) + ": " + key + ": expected one of {" +
                              allowed + "}, got '" + v + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, int, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["data.n"] = [](auto& c, auto& v, int l, auto& k) { c.n = parse_int(v, l, k); };
    t["data.d"] = [](auto& c, auto& v, int l, auto& k) { c.d = parse_int(v, l, k); };
    t["data.mu_norm"] = [](auto& c, auto& v, int l, auto& k) { c.mu_norm = parse_double(v, l, k); };
    t["data.sigma_p"] = [](auto& c, auto& v, int l, auto& k) { c.sigma_p = parse_double(v, l, k); };
    t["data.seed"] = [](auto& c, auto& v, int l, auto& k) { c.data_seed = parse_u64(v, l, k); };
    t["model.m"] = [](auto& c, auto& v, int l, auto& k) { c.m = parse_int(v, l, k); };
    t["model.kappa"] = [](auto& c, auto& v, int l, auto& k) {
      c.activation.kappa = parse_double(v, l, k);
    };
    t["model.q"] = [](auto& c, auto& v, int l, auto& k) {
      c.activation.q = static_cast<int>(parse_int(v, l, k));
    };
    t["train.eta"] = [](auto& c, auto& v, int l, auto& k) { c.train.eta = parse_double(v, l, k); };
    t["train.steps"] = [](auto& c, auto& v, int l, auto& k) { c.train.steps = parse_int(v, l, k); };
    t["train.sigma0"] = [](auto& c, auto& v, int l, auto& k) {
      c.train.sigma0 = parse_double(v, l, k);
    };
    t["train.sigma_b"] = [](auto& c, auto& v, int l, auto& k) {
      c.train.sigma_b = parse_double(v, l, k);
    };
    t["train.algo"] = [](auto& c, auto& v, int l, auto& k) {
      c.train.algo = parse_enum<Algorithm>(v, l, k, {{"gd", Algorithm::gd}, {"dpgd", Algorithm::dpgd}});
    };
    t["train.mode"] = [](auto& c, auto& v, int l, auto& k) {
      c.train.mode = parse_enum<TrainMode>(v, l, k,
                                           {{"direct", TrainMode::direct}, {"kernel", TrainMode::kernel}});
    };
    t["train.kernel_noise"] = [](auto& c, auto& v, int l, auto& k) {
      c.train.kernel_noise = parse_enum<KernelNoiseKind>(
          v, l, k, {{"sampled", KernelNoiseKind::sampled}, {"shared", KernelNoiseKind::shared}});
    };
    t["train.seed"] = [](auto& c, auto& v, int l, auto& k) { c.train.seed = parse_u64(v, l, k); };
    t["train.eval_every"] = [](auto& c, auto& v, int l, auto& k) {
      c.train.eval_every = parse_int(v, l, k);
    };
    t["train.checkpoint_every"] = [](auto& c, auto& v, int l, auto& k) {
      c.train.checkpoint_every = v == "never" ? 0 : parse_int(v, l, k);
    };
    t["train.track_decomposition"] = [](auto& c, auto& v, int l, auto& k) {
      c.train.track_decomposition = parse_bool(v, l, k);
    };
    t["eval.enabled"] = [](auto& c, auto& v, int l, auto& k) { c.eval_enabled = parse_bool(v, l, k); };
    t["eval.n_test"] = [](auto& c, auto& v, int l, auto& k) { c.eval.n_test = parse_int(v, l, k); };
    t["eval.seed"] = [](auto& c, auto& v, int l, auto& k) { c.eval.seed = parse_u64(v, l, k); };
    t["eval.tie_policy"] = [](auto& c, auto& v, int l, auto& k) {
      c.eval.tie_policy =
          parse_enum<TiePolicy>(v, l, k, {{"error", TiePolicy::error}, {"half", TiePolicy::half}});
    };
    t["eval.every"] = [](auto& c, auto& v, int l, auto& k) { c.eval.every = parse_int(v, l, k); };
    t["privacy.delta"] = [](auto& c, auto& v, int l, auto& k) {
      c.privacy_delta = parse_double(v, l, k);
    };
    t["privacy.theorem4_c"] = [](auto& c, auto& v, int l, auto& k) {
      c.theorem4_c = parse_double(v, l, k);
    };
    t["analysis.c_values"] = [](auto& c, auto& v, int l, auto& k) { c.c_values = parse_list(v, l, k); };
    t["analysis.delta"] = [](auto& c, auto& v, int l, auto& k) {
      c.analysis_delta = parse_double(v, l, k);
    };
    t["analysis.epsilon"] = [](auto& c, auto& v, int l, auto& k) {
      c.analysis_epsilon = parse_double(v, l, k);
    };
    for (const char* name : {"c_T1", "c_T_star", "c_T1_tilde", "c_T2_tilde", "c_T_star_tilde",
                             "c_T2_tilde_early_stop"}) {
      const std::string key = name;
      t["analysis." + key] = [key](auto& c, auto& v, int l, auto& k) {
        c.timescale_constants[key] = parse_double(v, l, k);
      };
    }
    t["sweep.sigma_p"] = [](auto& c, auto& v, int l, auto& k) {
      c.sweep_sigma_p = parse_list(v, l, k);
    };
    t["output.dir"] = [](auto& c, auto& v, int, auto&) { c.output_dir = v; };
    t["output.svg"] = [](auto& c, auto& v, int l, auto& k) { c.emit_svg = parse_bool(v, l, k); };
    return t;
  }();
  return table;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string fmt_list(const std::vector<double>& xs) {
  std::string out;
  for (double x : xs) out += (out.empty() ? "" : ", ") + fmt(x);
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  const auto fail = [this](const std::string& key, const std::string& msg) {
    const auto it = key_lines.find(key);
    const int line = it == key_lines.end() ? 0 : it->second;
    const std::string where = line > 0 ? "line " + std::to_string(line) + ": " : "";
    throw ConfigError(line, where + key + ": " + msg);
  };
  if (n < 1) fail("data.n", "must be at least 1");
  if (d < 2) fail("data.d", "must be at least 2");
  if (!(mu_norm > 0)) fail("data.mu_norm", "must be positive");
  if (!(sigma_p > 0)) fail("data.sigma_p", "must be positive");
  if (m < 1) fail("model.m", "must be at least 1");
  if (!(activation.kappa > 0)) fail("model.kappa", "must be positive");
  if (activation.q < 3) fail("model.q", "must be at least 3");
  if (!(train.eta > 0)) fail("train.eta", "must be positive");
  if (train.steps < 0) fail("train.steps", "must be non-negative");
  if (train.sigma0 < 0) fail("train.sigma0", "must be non-negative");
  if (train.sigma_b < 0) fail("train.sigma_b", "must be non-negative");
  if (train.algo == Algorithm::dpgd && !(train.sigma_b > 0)) {
    fail(key_lines.count("train.sigma_b") ? "train.sigma_b" : "train.algo",
         "algo = dpgd requires train.sigma_b > 0");
  }
  if (train.eval_every < 1) fail("train.eval_every", "must be at least 1");
  if (train.checkpoint_every < 0) fail("train.checkpoint_every", "must be positive or never");
  if (eval.n_test < 1) fail("eval.n_test", "must be at least 1");
  if (eval.every < 0) fail("eval.every", "must be non-negative");
  if (!(privacy_delta > 0 && privacy_delta < 1)) fail("privacy.delta", "must be in (0, 1)");
  if (!(theorem4_c > 0)) fail("privacy.theorem4_c", "must be positive");
  if (!(analysis_delta > 0 && analysis_delta < 1)) fail("analysis.delta", "must be in (0, 1)");
  if (!(analysis_epsilon > 0)) fail("analysis.epsilon", "must be positive");
  for (double c : c_values) {
    if (!(c > 0)) fail("analysis.c_values", "constants must be positive");
  }
  for (const auto& [k, v] : timescale_constants) {
    if (!(v > 0)) fail("analysis." + k, "must be positive");
  }
  for (double s : sweep_sigma_p) {
    if (!(s > 0)) fail("sweep.sigma_p", "noise levels must be positive");
  }
  if (output_dir.empty()) fail("output.dir", "must not be empty");
}

void ExperimentConfig::reseed(std::uint64_t seed) {
  data_seed = derive_seed(seed, 1);
  train.seed = derive_seed(seed, 2);
  eval.seed = derive_seed(seed, 3);
}

SignalSpec ExperimentConfig::signal() const { return SignalSpec::along_first_axis(d, mu_norm); }

NoiseSpec ExperimentConfig::noise() const { return NoiseSpec{sigma_p}; }

ProblemScales ExperimentConfig::scales() const {
  ProblemScales p;
  p.n = n;
  p.d = d;
  p.m = m;
  p.mu_norm = mu_norm;
  p.sigma_p = sigma_p;
  p.kappa = activation.kappa;
  p.q = activation.q;
  p.sigma0 = train.sigma0;
  p.eta = train.eta;
  p.sigma_b = train.sigma_b;
  p.delta = analysis_delta;
  p.horizon = static_cast<double>(std::max<std::int64_t>(train.steps, 1));
  return p;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line, "line " + std::to_string(line) + ": expected 'section.key = value'");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.find('.') == std::string::npos) {
      throw ConfigError(line, "line " + std::to_string(line) + ": key '" + key +
                                  "' is not of the form section.key");
    }
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError(line, "line " + std::to_string(line) + ": unknown key '" + key + "'");
    }
    if (cfg.key_lines.count(key)) {
      throw ConfigError(line, "line " + std::to_string(line) + ": duplicate key '" + key +
                                  "' (first set on line " + std::to_string(cfg.key_lines[key]) +
                                  ")");
    }
    if (value.empty()) {
      throw ConfigError(line, "line " + std::to_string(line) + ": " + key + ": missing value");
    }
    it->second(cfg, value, line, key);
    cfg.key_lines[key] = line;
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_config_text(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "data.n = " << c.n << "\n"
     << "data.d = " << c.d << "\n"
     << "data.mu_norm = " << fmt(c.mu_norm) << "\n"
     << "data.sigma_p = " << fmt(c.sigma_p) << "\n"
     << "data.seed = " << c.data_seed << "\n"
     << "model.m = " << c.m << "\n"
     << "model.kappa = " << fmt(c.activation.kappa) << "\n"
     << "model.q = " << c.activation.q << "\n"
     << "train.eta = " << fmt(c.train.eta) << "\n"
     << "train.steps = " << c.train.steps << "\n"
     << "train.sigma0 = " << fmt(c.train.sigma0) << "\n"
     << "train.sigma_b = " << fmt(c.train.sigma_b) << "\n"
     << "train.algo = " << to_string(c.train.algo) << "\n"
     << "train.mode = " << to_string(c.train.mode) << "\n"
     << "train.kernel_noise = "
     << (c.train.kernel_noise == KernelNoiseKind::shared ? "shared" : "sampled") << "\n"
     << "train.seed = " << c.train.seed << "\n"
     << "train.eval_every = " << c.train.eval_every << "\n"
     << "train.checkpoint_every = "
     << (c.train.checkpoint_every > 0 ? std::to_string(c.train.checkpoint_every) : "never")
     << "\n"
     << "train.track_decomposition = " << (c.train.track_decomposition ? "true" : "false")
     << "\n"
     << "eval.enabled = " << (c.eval_enabled ? "true" : "false") << "\n"
     << "eval.n_test = " << c.eval.n_test << "\n"
     << "eval.seed = " << c.eval.seed << "\n"
     << "eval.tie_policy = " << (c.eval.tie_policy == TiePolicy::half ? "half" : "error") << "\n"
     << "eval.every = " << c.eval.every << "\n"
     << "privacy.delta = " << fmt(c.privacy_delta) << "\n"
     << "privacy.theorem4_c = " << fmt(c.theorem4_c) << "\n"
     << "analysis.c_values = " << fmt_list(c.c_values) << "\n"
     << "analysis.delta = " << fmt(c.analysis_delta) << "\n"
     << "analysis.epsilon = " << fmt(c.analysis_epsilon) << "\n";
  for (const auto& [k, v] : c.timescale_constants) os << "analysis." << k << " = " << fmt(v) << "\n";
  os << "sweep.sigma_p = " << fmt_list(c.sweep_sigma_p) << "\n"
     << "output.dir = " << c.output_dir << "\n"
     << "output.svg = " << (c.emit_svg ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace dpgd
