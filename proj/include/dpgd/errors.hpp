#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dpgd {

enum class ErrorCode {
  invalid_signal,
  invalid_parameter,
  invalid_input,
  empty_dataset,
  shape_mismatch,
  missing_precompute,
  divergence,
  stale_state,
  incomplete_trace,
  ill_conditioned,
  infinite_privacy_loss,
  empty_eval,
  io,
  config,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::int64_t step, double loss)
      : Error(ErrorCode::divergence, "training diverged at step " + std::to_string(step) +
                                         " (train loss " + std::to_string(loss) + ")"),
        step_(step),
        loss_(loss) {}
  std::int64_t step() const noexcept { return step_; }
  double loss() const noexcept { return loss_; }

 private:
  std::int64_t step_;
  double loss_;
};

class IllConditionedError : public Error {
 public:
  explicit IllConditionedError(double condition)
      : Error(ErrorCode::ill_conditioned,
              "decomposition basis is numerically rank deficient (condition estimate " +
                  std::to_string(condition) + ")"),
        condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// Configuration problem anchored at a line of the source file (0 = not line-specific).
class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& what)
      : Error(ErrorCode::config, what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace dpgd
