// SPDX-License-Identifier: Apache-2.0
//
// Prompt-tuning classifier at desk scale. M learnable context vectors are
// concatenated with a class token and pushed through a frozen linear
// encoder; the resulting class text embedding is scored against an image
// embedding by temperature-scaled cosine softmax.

#ifndef ATLAS_MODEL_HPP
#define ATLAS_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "atlas/labels.hpp"
#include "atlas/numerics.hpp"

namespace atlas {

struct ModelDims {
  std::size_t prompt_length = 4;  // M
  std::size_t prompt_dim = 8;     // d_p
  std::size_t token_dim = 8;      // d_cls
  std::size_t embed_dim = 16;     // d_t

  std::size_t prompt_size() const noexcept { return prompt_length * prompt_dim; }
  std::size_t input_dim() const noexcept { return prompt_size() + token_dim; }

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Fixed linear text encoder: embed_dim x (M * d_p + d_cls).
class FrozenEncoder {
 public:
  /// Throws std::invalid_argument on shape mismatch, non-finite entries, or an all-zero row.
  FrozenEncoder(Matrix weight, ModelDims dims, std::uint64_t seed = 0);

  /// Entries i.i.d. N(0, 1 / input_dim).
  static FrozenEncoder random(const ModelDims& dims, std::uint64_t seed);

  const Matrix& weight() const noexcept { return weight_; }
  const ModelDims& dims() const noexcept { return dims_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// W * input
  Vector apply(std::span<const double> input) const;
  /// W_p^T * g, restricted to the prompt columns.
  Vector prompt_transpose_apply(std::span<const double> g) const;

 private:
  Matrix weight_;
  ModelDims dims_;
  std::uint64_t seed_;
};

class ClassVocabulary {
 public:
  ClassVocabulary() = default;
  /// Requires at least 2 classes, equal token dims, nonzero tokens.
  ClassVocabulary(std::vector<Vector> token_embeddings, std::vector<std::string> names);

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t token_dim() const noexcept { return tokens_.empty() ? 0 : tokens_.front().size(); }
  const Vector& token(std::size_t c) const { return tokens_.at(c); }
  const std::string& name(std::size_t c) const { return names_.at(c); }
  const std::vector<Vector>& tokens() const noexcept { return tokens_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// Classes [first, first + count) as a standalone vocabulary.
  ClassVocabulary slice(std::size_t first, std::size_t count) const;

  friend bool operator==(const ClassVocabulary&, const ClassVocabulary&) = default;

 private:
  std::vector<Vector> tokens_;
  std::vector<std::string> names_;
};

/// M context vectors of dimension d_p, stored contiguously. Also used for
/// gradients with respect to the prompt.
class PromptParams {
 public:
  PromptParams() = default;
  PromptParams(std::size_t length, std::size_t dim, double fill = 0.0);
  PromptParams(std::size_t length, std::size_t dim, Vector values);

  /// Entries i.i.d. N(0, scale^2).
  static PromptParams random(std::size_t length, std::size_t dim, std::uint64_t seed,
                             double scale = 0.02);

  std::size_t length() const noexcept { return length_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<const double> vector(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::span<double> vector(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
  std::span<const double> flat() const noexcept { return values_; }
  std::span<double> flat() noexcept { return values_; }

  double squared_norm() const;

  friend bool operator==(const PromptParams&, const PromptParams&) = default;

 private:
  std::size_t length_ = 0;
  std::size_t dim_ = 0;
  Vector values_;
};

struct ImageSample {
  std::string id;
  Vector embedding;  // I, dimension d_t
  OneHotLabel label;

  friend bool operator==(const ImageSample&, const ImageSample&) = default;
};

struct ModelConfig {
  double tau = 0.05;
};

/// Frozen pieces of the classifier. The vocabulary decides the class set.
struct ModelParts {
  FrozenEncoder encoder;
  ClassVocabulary vocab;
  ModelConfig config;

  std::size_t num_classes() const noexcept { return vocab.size(); }
};

/// Per-sample forward and backward quantities.
struct SampleEvaluation {
  ProbabilityVector probs;
  double loss = 0.0;
  PromptParams grad;
};

/// t_c = W * concat(v_1, ..., v_M, token_c)
Vector encode_class(const PromptParams& v, std::size_t c, const FrozenEncoder& enc,
                    const ClassVocabulary& vocab);

/// All class text embeddings, sharing the prompt contribution.
std::vector<Vector> encode_classes(const PromptParams& v, const FrozenEncoder& enc,
                                   const ClassVocabulary& vocab);

/// cos(t_c, I) / tau for every class.
Vector class_logits(const PromptParams& v, const ImageSample& x, const ModelParts& parts);

/// softmax_c(cos(t_c, I) / tau). Throws "degenerate text embedding" if some t_c is zero.
ProbabilityVector forward_probs(const PromptParams& v, const ImageSample& x,
                                const ModelParts& parts);

double loss(const PromptParams& v, const ImageSample& x, const ProbabilityVector& target,
            const ModelParts& parts);

/// Analytic gradient of the cross-entropy loss with respect to the prompt.
PromptParams grad_prompt(const PromptParams& v, const ImageSample& x,
                         const ProbabilityVector& target, const ModelParts& parts);

/// Forward pass plus gradient in one go.
SampleEvaluation evaluate_sample(const PromptParams& v, const ImageSample& x,
                                 const ProbabilityVector& target, const ModelParts& parts);

/// Predictions of the untrained model at a fixed reference prompt.
ProbabilityVector zero_shot_probs(const ImageSample& x, const PromptParams& reference_prompt,
                                  const ModelParts& parts);

/// Throws std::invalid_argument unless the prompt shape matches the encoder.
void check_prompt_shape(const PromptParams& v, const FrozenEncoder& enc);

}  // namespace atlas

#endif  // ATLAS_MODEL_HPP
