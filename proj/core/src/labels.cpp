// SPDX-License-Identifier: Apache-2.0

#include "atlas/labels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace atlas {

OneHotLabel::OneHotLabel(std::size_t class_index, std::size_t num_classes)
    : class_index_(class_index), num_classes_(num_classes) {
  if (num_classes == 0 || class_index >= num_classes) {
    throw std::invalid_argument("OneHotLabel: class index " + std::to_string(class_index) +
                                " out of range for " + std::to_string(num_classes) + " classes");
  }
}

ProbabilityVector OneHotLabel::distribution() const {
  return ProbabilityVector::one_hot(class_index_, num_classes_);
}

SmoothingConfig SmoothingConfig::uniform(std::size_t num_classes, double theta) {
  return SmoothingConfig{theta, ProbabilityVector::uniform(num_classes)};
}

MixWeight::MixWeight(double w) : w_(w) {
  if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("mix weight must lie in [0, 1]");
}

CslTable::CslTable(Matrix similarity, double tau_c) : matrix_(std::move(similarity)), tau_c_(tau_c) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() < 2) {
    throw std::invalid_argument("CslTable: expected a square matrix with at least 2 classes");
  }
  if (!(tau_c > 0.0)) throw std::invalid_argument("CslTable: tau_c must be positive");
  for (std::size_t i = 0; i < matrix_.rows(); ++i) {
    if (!ProbabilityVector::is_valid(matrix_.row(i))) {
      throw std::invalid_argument("CslTable: row " + std::to_string(i) +
                                  " is not a probability vector");
    }
  }
}

ProbabilityVector CslTable::row(std::size_t class_index) const {
  if (class_index >= num_classes()) {
    throw std::out_of_range("CslTable: class " + std::to_string(class_index) + " out of range");
  }
  auto r = matrix_.row(class_index);
  return ProbabilityVector(Vector(r.begin(), r.end()));
}

bool CslTable::column_diagonal_dominant() const {
  for (std::size_t j = 0; j < num_classes(); ++j) {
    for (std::size_t i = 0; i < num_classes(); ++i) {
      if (matrix_(i, j) > matrix_(j, j)) return false;
    }
  }
  return true;
}

double IslStats::fraction_argmax_corrected() const noexcept {
  if (num_mismatched == 0) return 1.0;
  return static_cast<double>(num_corrected) / static_cast<double>(num_mismatched);
}

IslTable::IslTable(std::map<std::string, ProbabilityVector> labels, double alpha, bool force_delta,
                   IslStats stats)
    : labels_(std::move(labels)), alpha_(alpha), force_delta_(force_delta), stats_(stats) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("IslTable: alpha must be nonnegative");
  }
  std::size_t num_classes = 0;
  for (const auto& [id, label] : labels_) {
    if (label.size() == 0) throw std::invalid_argument("IslTable: empty label for " + id);
    if (num_classes == 0) num_classes = label.size();
    if (label.size() != num_classes) {
      throw std::invalid_argument("IslTable: inconsistent class count at sample " + id);
    }
  }
  if (stats_.num_samples == 0) stats_.num_samples = labels_.size();
}

const ProbabilityVector& IslTable::at(const std::string& sample_id) const {
  auto it = labels_.find(sample_id);
  if (it == labels_.end()) throw std::out_of_range("ISL table has no entry for sample " + sample_id);
  return it->second;
}

ProbabilityVector vanilla_smooth(const OneHotLabel& y, const SmoothingConfig& cfg) {
  if (cfg.prior.size() != y.num_classes()) {
    throw std::invalid_argument("vanilla_smooth: prior has " + std::to_string(cfg.prior.size()) +
                                " classes, label has " + std::to_string(y.num_classes()));
  }
  if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) {
    throw std::invalid_argument("vanilla_smooth: theta must lie in [0, 1]");
  }
  Vector out(y.num_classes());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double hot = i == y.class_index() ? 1.0 : 0.0;
    out[i] = (1.0 - cfg.theta) * hot + cfg.theta * cfg.prior[i];
  }
  return ProbabilityVector(std::move(out));
}

CslTable build_csl(std::span<const Vector> class_text_embeddings, double tau_c) {
  const std::size_t num_classes = class_text_embeddings.size();
  if (num_classes < 2) throw std::invalid_argument("build_csl: need at least 2 classes");
  if (!(tau_c > 0.0)) throw std::invalid_argument("build_csl: tau_c must be positive");
  const std::size_t dim = class_text_embeddings.front().size();
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto& t = class_text_embeddings[c];
    if (t.size() != dim) {
      throw std::invalid_argument("build_csl: class " + std::to_string(c) +
                                  " has embedding dimension " + std::to_string(t.size()) +
                                  ", expected " + std::to_string(dim));
    }
    if (!(norm(t) > 0.0)) {
      throw std::invalid_argument("build_csl: degenerate embedding for class " +
                                  std::to_string(c));
    }
  }

  Matrix a(num_classes, num_classes);
  Vector logits(num_classes);
  for (std::size_t i = 0; i < num_classes; ++i) {
    for (std::size_t j = 0; j < num_classes; ++j) {
      // Self-similarity is exactly 1; computing it can land one ulp below a
      // parallel neighbour and break row dominance.
      logits[j] = i == j ? 1.0
                         : cosine_similarity(class_text_embeddings[i], class_text_embeddings[j]);
    }
    const auto row = softmax_with_temperature(logits, tau_c);
    for (std::size_t j = 0; j < num_classes; ++j) a(i, j) = row[j];
  }
  return CslTable(std::move(a), tau_c);
}

IslTable build_isl(const std::map<std::string, ProbabilityVector>& zero_shot_probs,
                   const std::map<std::string, OneHotLabel>& labels, double alpha,
                   bool force_delta) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("build_isl: alpha must be nonnegative");
  for (const auto& [id, _] : labels) {
    if (!zero_shot_probs.contains(id)) {
      throw std::invalid_argument("build_isl: missing zero-shot probabilities for sample " + id);
    }
  }
  IslStats stats;
  std::map<std::string, ProbabilityVector> out;
  for (const auto& [id, p] : zero_shot_probs) {
    auto it = labels.find(id);
    if (it == labels.end()) throw std::invalid_argument("build_isl: missing label for sample " + id);
    const OneHotLabel& y = it->second;
    if (p.size() != y.num_classes()) {
      throw std::invalid_argument("build_isl: class count mismatch for sample " + id);
    }
    const bool mismatched = p.argmax() != y.class_index();
    const double delta = (force_delta || mismatched) ? 1.0 : 0.0;
    const double scale = 1.0 + delta * alpha;
    Vector label(p.size());
    for (std::size_t i = 0; i < label.size(); ++i) {
      const double hot = i == y.class_index() ? 1.0 : 0.0;
      label[i] = (p[i] + delta * alpha * hot) / scale;
    }
    ProbabilityVector rectified(std::move(label));
    ++stats.num_samples;
    if (mismatched) {
      ++stats.num_mismatched;
      if (rectified.argmax() == y.class_index()) ++stats.num_corrected;
    }
    out.emplace(id, std::move(rectified));
  }
  return IslTable(std::move(out), alpha, force_delta, stats);
}

int schedule_phase(long epoch, long period) {
  if (period < 1) throw std::invalid_argument("K must be ≥ 1");
  if (epoch < 0) throw std::invalid_argument("schedule_phase: epoch must be nonnegative");
  return (epoch + 1) % period == 0 ? 0 : 1;
}

ProbabilityVector select_label(int xi, const OneHotLabel& y, const ProbabilityVector& soft) {
  if (soft.size() != y.num_classes()) {
    throw std::invalid_argument("select_label: soft label has " + std::to_string(soft.size()) +
                                " classes, expected " + std::to_string(y.num_classes()));
  }
  if (xi != 0 && xi != 1) throw std::invalid_argument("select_label: xi must be 0 or 1");
  return xi == 1 ? y.distribution() : soft;
}

ProbabilityVector mix_csl_isl(const ProbabilityVector& csl_label,
                              const ProbabilityVector& isl_label, MixWeight w) {
  if (csl_label.size() != isl_label.size()) {
    throw std::invalid_argument("mix_csl_isl: dimension mismatch");
  }
  const double a = w.value();
  Vector out(csl_label.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * csl_label[i] + (1.0 - a) * isl_label[i];
  return ProbabilityVector(std::move(out));
}

}  // namespace atlas
