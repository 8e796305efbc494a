// SPDX-License-Identifier: Apache-2.0

#include "atlas/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace atlas {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw std::invalid_argument(std::string(op) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, Vector entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("Matrix: expected " + std::to_string(rows * cols) +
                                " entries, got " + std::to_string(data_.size()));
  }
  require_finite(data_, "Matrix");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ProbabilityVector::ProbabilityVector(Vector probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("ProbabilityVector: empty");
  if (!is_valid(probs_)) {
    throw std::invalid_argument("ProbabilityVector: entries must be nonnegative and sum to 1");
  }
}

ProbabilityVector ProbabilityVector::one_hot(std::size_t index, std::size_t num_classes) {
  if (index >= num_classes) {
    throw std::invalid_argument("one_hot: class index " + std::to_string(index) +
                                " out of range for " + std::to_string(num_classes) + " classes");
  }
  Vector v(num_classes, 0.0);
  v[index] = 1.0;
  return ProbabilityVector(std::move(v));
}

ProbabilityVector ProbabilityVector::uniform(std::size_t num_classes) {
  if (num_classes == 0) throw std::invalid_argument("uniform: zero classes");
  return ProbabilityVector(Vector(num_classes, 1.0 / static_cast<double>(num_classes)));
}

bool ProbabilityVector::is_valid(std::span<const double> values, double tol) {
  if (values.empty()) return false;
  CompensatedSum total;
  for (double p : values) {
    if (!std::isfinite(p) || p < -kProbabilityEntryTolerance || p > 1.0 + tol) return false;
    total.add(p);
  }
  return std::abs(total.value() - 1.0) <= tol;
}

std::size_t ProbabilityVector::argmax() const noexcept { return atlas::argmax(probs_); }

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "cosine_similarity");
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw std::invalid_argument("degenerate embedding");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

ProbabilityVector softmax_with_temperature(std::span<const double> logits, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw std::invalid_argument("softmax_with_temperature: tau must be positive");
  }
  if (logits.empty()) throw std::invalid_argument("softmax_with_temperature: empty logits");
  require_finite(logits, "softmax_with_temperature");
  const double peak = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  CompensatedSum total;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - peak) / tau);
    total.add(out[i]);
  }
  const double z = total.value();
  for (double& p : out) p /= z;
  return ProbabilityVector(std::move(out));
}

double cross_entropy(const ProbabilityVector& target, const ProbabilityVector& pred) {
  require_same_dim(target.size(), pred.size(), "cross_entropy");
  CompensatedSum acc;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 0.0) continue;
    acc.add(-target[i] * std::log(std::max(pred[i], kLogFloor)));
  }
  return std::max(acc.value(), 0.0);
}

Vector softmax_ce_grad_logits(const ProbabilityVector& target, const ProbabilityVector& probs) {
  require_same_dim(target.size(), probs.size(), "softmax_ce_grad_logits");
  Vector g(probs.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = probs[i] - target[i];
  return g;
}

double deterministic_sum(std::span<const double> values) {
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

void axpy(double scale, std::span<const double> x, std::span<double> out) {
  require_same_dim(x.size(), out.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += scale * x[i];
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
  }
}

}  // namespace atlas
