// SPDX-License-Identifier: Apache-2.0
//
// Supervision signals: one-hot, uniform label smoothing, class-wise soft
// labels (CSL) from text-embedding similarities, instance-wise soft labels
// (ISL) from zero-shot predictions, and the alternating one-hot / soft
// schedule.

#ifndef ATLAS_LABELS_HPP
#define ATLAS_LABELS_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>

#include "atlas/numerics.hpp"

namespace atlas {

class OneHotLabel {
 public:
  OneHotLabel() = default;
  /// Throws std::invalid_argument unless class_index < num_classes.
  OneHotLabel(std::size_t class_index, std::size_t num_classes);

  std::size_t class_index() const noexcept { return class_index_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  ProbabilityVector distribution() const;

  friend bool operator==(const OneHotLabel&, const OneHotLabel&) = default;

 private:
  std::size_t class_index_ = 0;
  std::size_t num_classes_ = 1;
};

struct SmoothingConfig {
  double theta = 0.1;
  ProbabilityVector prior;

  /// theta with the uniform 1/C prior.
  static SmoothingConfig uniform(std::size_t num_classes, double theta);
};

/// Convex-combination weight of the CSL label when mixing CSL and ISL.
class MixWeight {
 public:
  /// Throws std::invalid_argument unless 0 <= w <= 1.
  explicit MixWeight(double w);
  double value() const noexcept { return w_; }

 private:
  double w_;
};

/// Row i holds the soft label for class i.
class CslTable {
 public:
  CslTable(Matrix similarity, double tau_c);

  std::size_t num_classes() const noexcept { return matrix_.rows(); }
  double tau_c() const noexcept { return tau_c_; }
  const Matrix& matrix() const noexcept { return matrix_; }
  ProbabilityVector row(std::size_t class_index) const;

  /// Whether every diagonal entry is also the maximum of its column.
  /// Reported only; row-wise dominance is the guaranteed property.
  bool column_diagonal_dominant() const;

 private:
  Matrix matrix_;
  double tau_c_;
};

struct IslStats {
  std::size_t num_samples = 0;
  /// Samples whose zero-shot argmax missed the ground-truth class.
  std::size_t num_mismatched = 0;
  /// Of those, samples whose rectified label now peaks at the ground truth.
  std::size_t num_corrected = 0;

  /// num_corrected / num_mismatched, or 1 when nothing needed correcting.
  double fraction_argmax_corrected() const noexcept;
};

class IslTable {
 public:
  IslTable(std::map<std::string, ProbabilityVector> labels, double alpha, bool force_delta,
           IslStats stats = {});

  const ProbabilityVector& at(const std::string& sample_id) const;
  bool contains(const std::string& sample_id) const { return labels_.contains(sample_id); }
  std::size_t size() const noexcept { return labels_.size(); }
  double alpha() const noexcept { return alpha_; }
  bool force_delta() const noexcept { return force_delta_; }
  const IslStats& stats() const noexcept { return stats_; }
  const std::map<std::string, ProbabilityVector>& labels() const noexcept { return labels_; }

 private:
  std::map<std::string, ProbabilityVector> labels_;
  double alpha_;
  bool force_delta_;
  IslStats stats_;
};

/// (1 - theta) * onehot(y) + theta * prior
ProbabilityVector vanilla_smooth(const OneHotLabel& y, const SmoothingConfig& cfg);

/// A_ij = softmax_j(cos(t_i, t_j) / tau_c).
CslTable build_csl(std::span<const Vector> class_text_embeddings, double tau_c);

/// label = (p + delta * alpha * onehot(y)) / (1 + delta * alpha), where delta
/// is 1 when forced or when argmax p (lowest index on ties) misses y.
IslTable build_isl(const std::map<std::string, ProbabilityVector>& zero_shot_probs,
                   const std::map<std::string, OneHotLabel>& labels, double alpha,
                   bool force_delta);

/// 0 on soft-label epochs ((epoch + 1) % period == 0), 1 otherwise.
int schedule_phase(long epoch, long period);

/// One-hot when xi == 1, the soft label when xi == 0.
ProbabilityVector select_label(int xi, const OneHotLabel& y, const ProbabilityVector& soft);

ProbabilityVector mix_csl_isl(const ProbabilityVector& csl_label,
                              const ProbabilityVector& isl_label, MixWeight w);

// CSV interchange. CSL: "# csl C=<int> tau_c=<float>" then C rows of C values.
// ISL: "# isl alpha=<float>" then rows "sample_id,p_0,...,p_{C-1}".
void write_csl_csv(std::ostream& out, const CslTable& table);
CslTable read_csl_csv(std::istream& in);
void write_isl_csv(std::ostream& out, const IslTable& table);
IslTable read_isl_csv(std::istream& in);

}  // namespace atlas

#endif  // ATLAS_LABELS_HPP
