#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "dpgd/rng.hpp"

namespace dpgd {

/// The fixed signal vector mu shared by every example.
struct SignalSpec {
  Eigen::VectorXd mu;

  Eigen::Index d() const { return mu.size(); }
  double norm() const { return mu.norm(); }
  double norm_sq() const { return mu.squaredNorm(); }
  void validate() const;

  /// mu = norm * e_1.
  static SignalSpec along_first_axis(Eigen::Index d, double norm);
};

struct NoiseSpec {
  double sigma_p = 1.0;
  void validate() const;
};

enum class PatchSlot : std::uint8_t { first = 0, second = 1 };

/*
 * One draw (x, y) from the signal-plus-noise distribution. The raw patches are
 * kept alongside the noise vector and the slot so callers never need to
 * re-identify which patch carries the signal.
 */
struct Example {
  Eigen::VectorXd patch_a;
  Eigen::VectorXd patch_b;
  int label = 1;
  PatchSlot signal_slot = PatchSlot::first;
  Eigen::VectorXd xi;

  const Eigen::VectorXd& signal_patch() const {
    return signal_slot == PatchSlot::first ? patch_a : patch_b;
  }
  const Eigen::VectorXd& noise_patch() const {
    return signal_slot == PatchSlot::first ? patch_b : patch_a;
  }
};

Example make_example(const SignalSpec& signal, int label, PatchSlot slot, Eigen::VectorXd xi);

/*
 * An immutable training set. Besides the examples it caches the stacked noise
 * matrix (row i = xi_i), labels as +-1 doubles, squared noise norms and,
 * optionally, the Gram matrix <xi_i, xi_k>.
 */
class Dataset {
 public:
  Dataset(std::vector<Example> examples, SignalSpec signal, NoiseSpec noise, std::uint64_t seed,
          bool with_gram = true);

  Eigen::Index n() const { return static_cast<Eigen::Index>(examples_.size()); }
  Eigen::Index d() const { return signal_.d(); }

  const std::vector<Example>& examples() const { return examples_; }
  const Example& operator[](Eigen::Index i) const { return examples_[static_cast<std::size_t>(i)]; }
  const SignalSpec& signal() const { return signal_; }
  const NoiseSpec& noise() const { return noise_; }
  std::uint64_t seed() const { return seed_; }

  const Eigen::MatrixXd& noise_matrix() const { return noise_matrix_; }
  const Eigen::VectorXd& labels() const { return labels_; }
  const Eigen::VectorXd& noise_norms_sq() const { return noise_norms_sq_; }
  const std::optional<Eigen::MatrixXd>& gram() const { return gram_; }

  /// Number of examples with the given label (|Gamma_j|).
  Eigen::Index class_count(int label) const;

 private:
  std::vector<Example> examples_;
  SignalSpec signal_;
  NoiseSpec noise_;
  std::uint64_t seed_;
  Eigen::MatrixXd noise_matrix_;
  Eigen::VectorXd labels_;
  Eigen::VectorXd noise_norms_sq_;
  std::optional<Eigen::MatrixXd> gram_;
};

/// g - (<g, mu> / |mu|^2) mu.
Eigen::VectorXd project_out(const Eigen::VectorXd& g, const Eigen::VectorXd& mu);

/// xi ~ N(0, sigma_p^2 (I - mu mu^T / |mu|^2)), by projecting an isotropic draw.
Eigen::VectorXd sample_noise(const SignalSpec& signal, const NoiseSpec& noise, Stream& stream);

/// Label, signal slot, then noise, all from one stream.
Example sample_example(const SignalSpec& signal, const NoiseSpec& noise, Stream& stream);

/// n examples; example i is drawn from Stream(seed, tag, i).
Dataset sample_dataset(Eigen::Index n, const SignalSpec& signal, const NoiseSpec& noise,
                       std::uint64_t seed, StreamTag tag = StreamTag::train_example);

/// |mu|_2 / (sigma_p sqrt(d)).
double snr(const SignalSpec& signal, const NoiseSpec& noise);

}  // namespace dpgd
