// SPDX-License-Identifier: Apache-2.0

#include "atlas/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "atlas/random.hpp"

namespace atlas {

FrozenEncoder::FrozenEncoder(Matrix weight, ModelDims dims, std::uint64_t seed)
    : weight_(std::move(weight)), dims_(dims), seed_(seed) {
  if (dims_.prompt_length == 0 || dims_.prompt_dim == 0 || dims_.token_dim == 0 ||
      dims_.embed_dim == 0) {
    throw std::invalid_argument("FrozenEncoder: all dimensions must be positive");
  }
  if (weight_.rows() != dims_.embed_dim || weight_.cols() != dims_.input_dim()) {
    throw std::invalid_argument("FrozenEncoder: weight is " + std::to_string(weight_.rows()) +
                                "x" + std::to_string(weight_.cols()) + ", expected " +
                                std::to_string(dims_.embed_dim) + "x" +
                                std::to_string(dims_.input_dim()));
  }
  require_finite(weight_.data(), "FrozenEncoder");
  for (std::size_t r = 0; r < weight_.rows(); ++r) {
    if (squared_norm(weight_.row(r)) == 0.0) {
      throw std::invalid_argument("FrozenEncoder: row " + std::to_string(r) + " is all zero");
    }
  }
}

FrozenEncoder FrozenEncoder::random(const ModelDims& dims, std::uint64_t seed) {
  auto rng = make_rng(seed, rng_stream::kEncoder);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(dims.input_dim()));
  Vector entries = gaussian_vector(rng, dims.embed_dim * dims.input_dim(), stddev);
  return FrozenEncoder(Matrix(dims.embed_dim, dims.input_dim(), std::move(entries)), dims, seed);
}

Vector FrozenEncoder::apply(std::span<const double> input) const {
  if (input.size() != weight_.cols()) {
    throw std::invalid_argument("FrozenEncoder::apply: input has dimension " +
                                std::to_string(input.size()) + ", expected " +
                                std::to_string(weight_.cols()));
  }
  Vector out(weight_.rows());
  for (std::size_t r = 0; r < weight_.rows(); ++r) out[r] = dot(weight_.row(r), input);
  return out;
}

Vector FrozenEncoder::prompt_transpose_apply(std::span<const double> g) const {
  if (g.size() != weight_.rows()) {
    throw std::invalid_argument("FrozenEncoder::prompt_transpose_apply: dimension mismatch");
  }
  Vector out(dims_.prompt_size(), 0.0);
  for (std::size_t r = 0; r < weight_.rows(); ++r) {
    const auto row = weight_.row(r).first(dims_.prompt_size());
    axpy(g[r], row, out);
  }
  return out;
}

ClassVocabulary::ClassVocabulary(std::vector<Vector> token_embeddings,
                                 std::vector<std::string> names)
    : tokens_(std::move(token_embeddings)), names_(std::move(names)) {
  if (tokens_.size() < 2) throw std::invalid_argument("ClassVocabulary: need at least 2 classes");
  if (names_.size() != tokens_.size()) {
    throw std::invalid_argument("ClassVocabulary: names and embeddings differ in length");
  }
  const std::size_t dim = tokens_.front().size();
  for (std::size_t c = 0; c < tokens_.size(); ++c) {
    if (tokens_[c].size() != dim || dim == 0) {
      throw std::invalid_argument("ClassVocabulary: class " + std::to_string(c) +
                                  " has inconsistent token dimension");
    }
    require_finite(tokens_[c], "ClassVocabulary");
    if (squared_norm(tokens_[c]) == 0.0) {
      throw std::invalid_argument("ClassVocabulary: class " + std::to_string(c) +
                                  " has a zero token embedding");
    }
  }
}

ClassVocabulary ClassVocabulary::slice(std::size_t first, std::size_t count) const {
  if (first + count > size()) throw std::out_of_range("ClassVocabulary::slice out of range");
  return ClassVocabulary(
      std::vector<Vector>(tokens_.begin() + static_cast<std::ptrdiff_t>(first),
                          tokens_.begin() + static_cast<std::ptrdiff_t>(first + count)),
      std::vector<std::string>(names_.begin() + static_cast<std::ptrdiff_t>(first),
                               names_.begin() + static_cast<std::ptrdiff_t>(first + count)));
}

PromptParams::PromptParams(std::size_t length, std::size_t dim, double fill)
    : length_(length), dim_(dim), values_(length * dim, fill) {}

PromptParams::PromptParams(std::size_t length, std::size_t dim, Vector values)
    : length_(length), dim_(dim), values_(std::move(values)) {
  if (values_.size() != length * dim) {
    throw std::invalid_argument("PromptParams: expected " + std::to_string(length * dim) +
                                " values, got " + std::to_string(values_.size()));
  }
  require_finite(values_, "PromptParams");
}

PromptParams PromptParams::random(std::size_t length, std::size_t dim, std::uint64_t seed,
                                  double scale) {
  auto rng = make_rng(seed, rng_stream::kPromptInit);
  return PromptParams(length, dim, gaussian_vector(rng, length * dim, scale));
}

double PromptParams::squared_norm() const { return atlas::squared_norm(values_); }

void check_prompt_shape(const PromptParams& v, const FrozenEncoder& enc) {
  if (v.length() != enc.dims().prompt_length || v.dim() != enc.dims().prompt_dim) {
    throw std::invalid_argument("prompt is " + std::to_string(v.length()) + "x" +
                                std::to_string(v.dim()) + ", encoder expects " +
                                std::to_string(enc.dims().prompt_length) + "x" +
                                std::to_string(enc.dims().prompt_dim));
  }
}

namespace {

void check_vocab(const FrozenEncoder& enc, const ClassVocabulary& vocab) {
  if (vocab.token_dim() != enc.dims().token_dim) {
    throw std::invalid_argument("class token dimension " + std::to_string(vocab.token_dim()) +
                                " does not match encoder " + std::to_string(enc.dims().token_dim));
  }
}

void check_image(const ImageSample& x, const ModelParts& parts) {
  if (x.embedding.size() != parts.encoder.dims().embed_dim) {
    throw std::invalid_argument("image " + x.id + " has embedding dimension " +
                                std::to_string(x.embedding.size()) + ", expected " +
                                std::to_string(parts.encoder.dims().embed_dim));
  }
  if (x.label.num_classes() != parts.num_classes()) {
    throw std::invalid_argument("image " + x.id + " is labelled over " +
                                std::to_string(x.label.num_classes()) + " classes, model has " +
                                std::to_string(parts.num_classes()));
  }
}

// Cosine pieces needed by both the forward and backward pass.
struct ClassGeometry {
  std::vector<Vector> text;
  Vector text_norm;
  Vector raw_cos;
  double image_norm = 0.0;
};

ClassGeometry class_geometry(const PromptParams& v, const ImageSample& x, const ModelParts& parts) {
  check_image(x, parts);
  ClassGeometry g;
  g.text = encode_classes(v, parts.encoder, parts.vocab);
  g.image_norm = norm(x.embedding);
  if (!(g.image_norm > 0.0)) throw std::invalid_argument("degenerate embedding: image " + x.id);
  g.text_norm.resize(g.text.size());
  g.raw_cos.resize(g.text.size());
  for (std::size_t c = 0; c < g.text.size(); ++c) {
    g.text_norm[c] = norm(g.text[c]);
    if (!(g.text_norm[c] > 0.0)) {
      throw std::invalid_argument("degenerate text embedding for class " + std::to_string(c));
    }
    g.raw_cos[c] = dot(g.text[c], x.embedding) / (g.text_norm[c] * g.image_norm);
  }
  return g;
}

ProbabilityVector probs_from_geometry(const ClassGeometry& g, double tau) {
  Vector logits(g.raw_cos.size());
  for (std::size_t c = 0; c < logits.size(); ++c) logits[c] = std::clamp(g.raw_cos[c], -1.0, 1.0);
  return softmax_with_temperature(logits, tau);
}

}  // namespace

std::vector<Vector> encode_classes(const PromptParams& v, const FrozenEncoder& enc,
                                   const ClassVocabulary& vocab) {
  check_prompt_shape(v, enc);
  check_vocab(enc, vocab);
  const auto& w = enc.weight();
  const std::size_t p = enc.dims().prompt_size();
  Vector shared(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) shared[r] = dot(w.row(r).first(p), v.flat());
  std::vector<Vector> out;
  out.reserve(vocab.size());
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    Vector t = shared;
    for (std::size_t r = 0; r < w.rows(); ++r) t[r] += dot(w.row(r).subspan(p), vocab.token(c));
    out.push_back(std::move(t));
  }
  return out;
}

Vector encode_class(const PromptParams& v, std::size_t c, const FrozenEncoder& enc,
                    const ClassVocabulary& vocab) {
  check_prompt_shape(v, enc);
  check_vocab(enc, vocab);
  if (c >= vocab.size()) throw std::out_of_range("encode_class: class index out of range");
  Vector input(v.flat().begin(), v.flat().end());
  input.insert(input.end(), vocab.token(c).begin(), vocab.token(c).end());
  return enc.apply(input);
}

Vector class_logits(const PromptParams& v, const ImageSample& x, const ModelParts& parts) {
  const auto g = class_geometry(v, x, parts);
  Vector logits(g.raw_cos.size());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    logits[c] = std::clamp(g.raw_cos[c], -1.0, 1.0) / parts.config.tau;
  }
  return logits;
}

ProbabilityVector forward_probs(const PromptParams& v, const ImageSample& x,
                                const ModelParts& parts) {
  return probs_from_geometry(class_geometry(v, x, parts), parts.config.tau);
}

double loss(const PromptParams& v, const ImageSample& x, const ProbabilityVector& target,
            const ModelParts& parts) {
  return cross_entropy(target, forward_probs(v, x, parts));
}

SampleEvaluation evaluate_sample(const PromptParams& v, const ImageSample& x,
                                 const ProbabilityVector& target, const ModelParts& parts) {
  if (target.size() != parts.num_classes()) {
    throw std::invalid_argument("target has " + std::to_string(target.size()) +
                                " classes, model has " + std::to_string(parts.num_classes()));
  }
  const auto g = class_geometry(v, x, parts);
  SampleEvaluation out{probs_from_geometry(g, parts.config.tau), 0.0, {}};
  out.loss = cross_entropy(target, out.probs);

  // dl/dz_c = p_c - y_c with z_c = cos(t_c, I) / tau, and
  // dcos/dt_c = I / (|t_c||I|) - cos * t_c / |t_c|^2.
  const Vector dz = softmax_ce_grad_logits(target, out.probs);
  const std::size_t dt = parts.encoder.dims().embed_dim;
  std::vector<CompensatedSum> acc(dt);
  for (std::size_t c = 0; c < g.text.size(); ++c) {
    const double coef = dz[c] / parts.config.tau;
    if (coef == 0.0) continue;
    const double inv_norms = 1.0 / (g.text_norm[c] * g.image_norm);
    const double cos_over_t2 = g.raw_cos[c] / (g.text_norm[c] * g.text_norm[c]);
    for (std::size_t k = 0; k < dt; ++k) {
      acc[k].add(coef * (x.embedding[k] * inv_norms - cos_over_t2 * g.text[c][k]));
    }
  }
  Vector grad_t(dt);
  for (std::size_t k = 0; k < dt; ++k) grad_t[k] = acc[k].value();
  out.grad = PromptParams(v.length(), v.dim(), parts.encoder.prompt_transpose_apply(grad_t));
  return out;
}

PromptParams grad_prompt(const PromptParams& v, const ImageSample& x,
                         const ProbabilityVector& target, const ModelParts& parts) {
  return evaluate_sample(v, x, target, parts).grad;
}

ProbabilityVector zero_shot_probs(const ImageSample& x, const PromptParams& reference_prompt,
                                  const ModelParts& parts) {
  return forward_probs(reference_prompt, x, parts);
}

}  // namespace atlas
