#include "dpgd/data.hpp"

#include <cmath>
#include <utility>

#include "dpgd/errors.hpp"

namespace dpgd {

void SignalSpec::validate() const {
  require(mu.size() > 0, ErrorCode::invalid_signal, "signal dimension must be positive");
  require(mu.allFinite(), ErrorCode::invalid_signal, "signal has non-finite entries");
  require(mu.squaredNorm() > 0.0, ErrorCode::invalid_signal, "signal vector has zero norm");
}

SignalSpec SignalSpec::along_first_axis(Eigen::Index d, double norm) {
  require(d > 0, ErrorCode::invalid_signal, "signal dimension must be positive");
  SignalSpec spec{Eigen::VectorXd::Zero(d)};
  spec.mu[0] = norm;
  spec.validate();
  return spec;
}

void NoiseSpec::validate() const {
  require(std::isfinite(sigma_p), ErrorCode::invalid_parameter, "sigma_p must be finite");
  require(sigma_p > 0.0, ErrorCode::invalid_parameter, "sigma_p must be positive");
}

Example make_example(const SignalSpec& signal, int label, PatchSlot slot, Eigen::VectorXd xi) {
  require(label == 1 || label == -1, ErrorCode::invalid_input, "label must be +1 or -1");
  require(xi.size() == signal.d(), ErrorCode::shape_mismatch, "noise/signal dimension mismatch");
  Example ex;
  ex.label = label;
  ex.signal_slot = slot;
  Eigen::VectorXd signal_patch = static_cast<double>(label) * signal.mu;
  if (slot == PatchSlot::first) {
    ex.patch_a = std::move(signal_patch);
    ex.patch_b = xi;
  } else {
    ex.patch_a = xi;
    ex.patch_b = std::move(signal_patch);
  }
  ex.xi = std::move(xi);
  return ex;
}

Dataset::Dataset(std::vector<Example> examples, SignalSpec signal, NoiseSpec noise,
                 std::uint64_t seed, bool with_gram)
    : examples_(std::move(examples)), signal_(std::move(signal)), noise_(noise), seed_(seed) {
  require(!examples_.empty(), ErrorCode::empty_dataset, "dataset must contain at least one example");
  signal_.validate();
  noise_.validate();
  const Eigen::Index rows = n();
  const Eigen::Index cols = d();
  noise_matrix_.resize(rows, cols);
  labels_.resize(rows);
  noise_norms_sq_.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Example& ex = examples_[static_cast<std::size_t>(i)];
    require(ex.xi.size() == cols && ex.patch_a.size() == cols && ex.patch_b.size() == cols,
            ErrorCode::shape_mismatch, "example dimension differs from signal dimension");
    noise_matrix_.row(i) = ex.xi.transpose();
    labels_[i] = static_cast<double>(ex.label);
    noise_norms_sq_[i] = ex.xi.squaredNorm();
  }
  if (with_gram) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(rows, rows);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(noise_matrix_);
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    gram.diagonal() = noise_norms_sq_;
    gram_ = std::move(gram);
  }
}

Eigen::Index Dataset::class_count(int label) const {
  return (labels_.array() == static_cast<double>(label)).count();
}

Eigen::VectorXd project_out(const Eigen::VectorXd& g, const Eigen::VectorXd& mu) {
  return g - (g.dot(mu) / mu.squaredNorm()) * mu;
}

Eigen::VectorXd sample_noise(const SignalSpec& signal, const NoiseSpec& noise, Stream& stream) {
  signal.validate();
  noise.validate();
  Eigen::VectorXd g(signal.d());
  for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = stream.normal(noise.sigma_p);
  return project_out(g, signal.mu);
}

Example sample_example(const SignalSpec& signal, const NoiseSpec& noise, Stream& stream) {
  const int label = stream.rademacher();
  const PatchSlot slot = stream.rademacher() > 0 ? PatchSlot::first : PatchSlot::second;
  return make_example(signal, label, slot, sample_noise(signal, noise, stream));
}

Dataset sample_dataset(Eigen::Index n, const SignalSpec& signal, const NoiseSpec& noise,
                       std::uint64_t seed, StreamTag tag) {
  require(n >= 1, ErrorCode::empty_dataset, "dataset size must be at least 1");
  signal.validate();
  noise.validate();
  std::vector<Example> examples;
  examples.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Stream stream(seed, tag, static_cast<std::uint64_t>(i));
    examples.push_back(sample_example(signal, noise, stream));
  }
  return Dataset(std::move(examples), signal, noise, seed);
}

double snr(const SignalSpec& signal, const NoiseSpec& noise) {
  require(noise.sigma_p > 0.0, ErrorCode::invalid_parameter, "sigma_p must be positive");
  require(signal.d() >= 1, ErrorCode::invalid_signal, "dimension must be positive");
  return signal.norm() / (noise.sigma_p * std::sqrt(static_cast<double>(signal.d())));
}

}  // namespace dpgd
