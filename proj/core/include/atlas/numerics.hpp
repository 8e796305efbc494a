// SPDX-License-Identifier: Apache-2.0
//
// Dense vector helpers, probability vectors, and the softmax / cross-entropy
// primitives shared by every other part of the library.

#ifndef ATLAS_NUMERICS_HPP
#define ATLAS_NUMERICS_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace atlas {

using Vector = std::vector<double>;

/// Tolerance used when validating that a vector sums to one.
inline constexpr double kProbabilitySumTolerance = 1e-9;
/// Entries above -kProbabilityEntryTolerance count as nonnegative.
inline constexpr double kProbabilityEntryTolerance = 1e-12;
/// Floor applied to predictions before taking a log.
inline constexpr double kLogFloor = 1e-300;

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, Vector entries);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> data() const noexcept { return data_; }

  static Matrix identity(std::size_t n);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

/// A vector of nonnegative entries summing to one.
///
/// Construction validates the invariant and throws std::invalid_argument
/// otherwise, so any ProbabilityVector in hand is known to be well formed.
class ProbabilityVector {
 public:
  ProbabilityVector() = default;
  explicit ProbabilityVector(Vector probs);
  ProbabilityVector(std::initializer_list<double> probs) : ProbabilityVector(Vector(probs)) {}

  static ProbabilityVector one_hot(std::size_t index, std::size_t num_classes);
  static ProbabilityVector uniform(std::size_t num_classes);

  /// True when every entry is >= -1e-12 and the sum is within `tol` of one.
  static bool is_valid(std::span<const double> values, double tol = kProbabilitySumTolerance);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const noexcept { return probs_[i]; }
  std::span<const double> values() const noexcept { return probs_; }
  const Vector& vector() const noexcept { return probs_; }
  auto begin() const noexcept { return probs_.begin(); }
  auto end() const noexcept { return probs_.end(); }

  /// Index of the largest entry; ties go to the lowest index.
  std::size_t argmax() const noexcept;

  friend bool operator==(const ProbabilityVector&, const ProbabilityVector&) = default;

 private:
  Vector probs_;
};

/// Neumaier-compensated accumulator. Adding the same values in the same
/// order always yields the same bits.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double norm(std::span<const double> a);

/// Cosine of the angle between a and b, clamped to [-1, 1].
/// Throws std::invalid_argument("degenerate embedding") on a zero-norm input.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// exp(z_i / tau) / sum_j exp(z_j / tau), evaluated with max subtraction.
ProbabilityVector softmax_with_temperature(std::span<const double> logits, double tau);

/// -sum_i target_i * log(max(pred_i, 1e-300)).
double cross_entropy(const ProbabilityVector& target, const ProbabilityVector& pred);

/// Gradient of cross_entropy(target, softmax(z)) with respect to z: probs - target.
Vector softmax_ce_grad_logits(const ProbabilityVector& target, const ProbabilityVector& probs);

/// Left-to-right compensated summation.
double deterministic_sum(std::span<const double> values);

/// out += scale * x
void axpy(double scale, std::span<const double> x, std::span<double> out);

/// Index of the largest value, lowest index on ties.
std::size_t argmax(std::span<const double> values);

/// Throws std::invalid_argument unless every entry is finite.
void require_finite(std::span<const double> values, const char* what);

}  // namespace atlas

#endif  // ATLAS_NUMERICS_HPP
