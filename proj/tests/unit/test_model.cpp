// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "atlas/model.hpp"
#include "test_support.hpp"

namespace atlas {
namespace {

// One context scalar and two-dimensional class tokens pushed through the
// identity, so t_c = [v, token_c].
ModelParts identity_parts(std::vector<Vector> tokens, double tau = 1.0) {
  const ModelDims dims{1, 1, 2, 3};
  std::vector<std::string> names;
  for (std::size_t c = 0; c < tokens.size(); ++c) names.push_back("c" + std::to_string(c));
  return ModelParts{FrozenEncoder(Matrix::identity(3), dims),
                    ClassVocabulary(std::move(tokens), std::move(names)), ModelConfig{tau}};
}

ImageSample image(Vector e, std::size_t label, std::size_t classes) {
  return ImageSample{"x", std::move(e), OneHotLabel(label, classes)};
}

TEST(Encode, IdentityEncoderConcatenates) {
  const auto parts = identity_parts({{1, 2}, {3, 4}});
  const PromptParams v(1, 1, Vector{0.5});
  EXPECT_EQ(encode_class(v, 1, parts.encoder, parts.vocab), (Vector{0.5, 3, 4}));
}

TEST(Encode, ZeroPromptIsLinearInToken) {
  const ModelDims dims{2, 3, 4, 5};
  const auto enc = FrozenEncoder::random(dims, 3);
  const ClassVocabulary vocab({{1, -1, 2, 0.5}, {0, 1, 0, 1}}, {"a", "b"});
  const PromptParams zero(2, 3);
  const auto t = encode_class(zero, 0, enc, vocab);
  Vector input(dims.input_dim(), 0.0);
  for (std::size_t k = 0; k < 4; ++k) input[dims.prompt_size() + k] = vocab.token(0)[k];
  const auto want = enc.apply(input);
  for (std::size_t r = 0; r < t.size(); ++r) EXPECT_NEAR(t[r], want[r], 1e-15);
}

TEST(Encode, PromptPartIsLinear) {
  const ModelDims dims{3, 4, 4, 6};
  const auto enc = FrozenEncoder::random(dims, 5);
  const ClassVocabulary vocab({{1, 0, 0, 0}, {0, 1, 0, 0}}, {"a", "b"});
  const auto v = PromptParams::random(3, 4, 8, 1.0);
  Vector doubled(v.flat().begin(), v.flat().end());
  for (double& x : doubled) x *= 2;
  const auto t0 = encode_class(PromptParams(3, 4), 1, enc, vocab);
  const auto t1 = encode_class(v, 1, enc, vocab);
  const auto t2 = encode_class(PromptParams(3, 4, doubled), 1, enc, vocab);
  for (std::size_t r = 0; r < t0.size(); ++r) EXPECT_NEAR(t2[r] - t0[r], 2 * (t1[r] - t0[r]), 1e-13);
}

TEST(Forward, IdenticalClassesGiveUniform) {
  const auto parts = identity_parts({{1, 2}, {1, 2}, {1, 2}});
  const auto p = forward_probs(PromptParams(1, 1, Vector{0.3}), image({1, 1, 1}, 0, 3), parts);
  for (double x : p) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
}

TEST(Forward, TwoClassScalarCase) {
  const auto parts = identity_parts({{1, 0}, {0, 1}});
  const auto x = image({0, 1, 0}, 0, 2);
  const auto p = forward_probs(PromptParams(1, 1), x, parts);
  const double e = std::exp(1.0);
  EXPECT_NEAR(p[0], e / (e + 1), 1e-15);
  EXPECT_NEAR(loss(PromptParams(1, 1), x, ProbabilityVector{1, 0}, parts), -std::log(e / (e + 1)),
              1e-15);
  EXPECT_NEAR(loss(PromptParams(1, 1), x, ProbabilityVector{1, 0}, parts), 0.3133, 1e-4);
}

TEST(Forward, ImageScaleInvariance) {
  auto prob = testing::random_problem(1, {2, 3, 3, 5}, 4, 6, 0.2);
  for (const auto& s : prob.samples) {
    ImageSample scaled = s;
    for (double& x : scaled.embedding) x *= 17.5;
    const auto a = forward_probs(prob.prompt, s, prob.parts);
    const auto b = forward_probs(prob.prompt, scaled, prob.parts);
    for (std::size_t c = 0; c < a.size(); ++c) EXPECT_NEAR(a[c], b[c], 1e-14);
  }
}

TEST(Forward, DegenerateTextEmbeddingThrows) {
  // Rank-deficient encoder: t_c = (v + token_c) * [1, 1], which vanishes for class 0.
  const ModelDims dims{1, 1, 1, 2};
  Matrix w(2, 2, Vector{1, 1, 1, 1});
  const ModelParts parts{FrozenEncoder(w, dims), ClassVocabulary({{1}, {2}}, {"a", "b"}),
                         ModelConfig{1.0}};
  EXPECT_THROW(forward_probs(PromptParams(1, 1, Vector{-1}), image({1, 0}, 0, 2), parts),
               std::invalid_argument);
}

TEST(Loss, EntropyAndUniform) {
  auto prob = testing::random_problem(2, {2, 2, 3, 4}, 5, 3, 0.5);
  const auto& x = prob.samples[0];
  const auto p = forward_probs(prob.prompt, x, prob.parts);
  double h = 0.0;
  for (double q : p) h -= q * std::log(q);
  EXPECT_NEAR(loss(prob.prompt, x, p, prob.parts), h, 1e-13);

  const auto flat = identity_parts({{1, 2}, {1, 2}, {1, 2}, {1, 2}});
  EXPECT_NEAR(loss(PromptParams(1, 1), image({1, 0, 0}, 2, 4), ProbabilityVector::one_hot(2, 4), flat),
              std::log(4.0), 1e-14);
}

TEST(Gradient, VanishesWhenTargetMatchesPrediction) {
  auto prob = testing::random_problem(3, {3, 4, 4, 6}, 5, 4, 0.3);
  for (const auto& x : prob.samples) {
    const auto p = forward_probs(prob.prompt, x, prob.parts);
    const auto g = grad_prompt(prob.prompt, x, p, prob.parts);
    for (double gi : g.flat()) EXPECT_NEAR(gi, 0.0, 1e-12);
  }
}

TEST(Gradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(99);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const ModelDims dims{1 + seed % 4, 2 + seed % 7, 1 + seed % 8, 2 + (seed * 3) % 7};
    const double tau = 0.05 + 0.2 * static_cast<double>(seed % 5);
    auto prob = testing::random_problem(seed, dims, 2 + seed % 9, 1, tau);
    const auto& x = prob.samples[0];
    const auto target = testing::random_distribution(rng, prob.parts.num_classes());
    const auto f = [&](const Vector& flat) {
      return loss(PromptParams(dims.prompt_length, dims.prompt_dim, flat), x, target, prob.parts);
    };
    const Vector v0(prob.prompt.flat().begin(), prob.prompt.flat().end());
    const auto fd = testing::finite_difference_gradient(f, v0);
    const auto g = grad_prompt(prob.prompt, x, target, prob.parts);
    EXPECT_LE(testing::max_relative_error(Vector(g.flat().begin(), g.flat().end()), fd), 1e-6)
        << "seed " << seed;
  }
}

TEST(Gradient, ImageScaleInvariance) {
  auto prob = testing::random_problem(4, {2, 3, 3, 5}, 3, 5, 0.2);
  std::mt19937_64 rng(1);
  for (const auto& s : prob.samples) {
    ImageSample scaled = s;
    for (double& x : scaled.embedding) x *= 0.01;
    const auto target = testing::random_distribution(rng, 3);
    const auto a = grad_prompt(prob.prompt, s, target, prob.parts);
    const auto b = grad_prompt(prob.prompt, scaled, target, prob.parts);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.flat()[i], b.flat()[i], 1e-13);
  }
}

TEST(Gradient, EvaluateSampleAgrees) {
  auto prob = testing::random_problem(6, {2, 4, 3, 5}, 4, 3, 0.1);
  const auto target = ProbabilityVector::one_hot(1, 4);
  for (const auto& x : prob.samples) {
    const auto e = evaluate_sample(prob.prompt, x, target, prob.parts);
    EXPECT_EQ(e.loss, loss(prob.prompt, x, target, prob.parts));
    EXPECT_EQ(e.grad, grad_prompt(prob.prompt, x, target, prob.parts));
    EXPECT_EQ(e.probs, forward_probs(prob.prompt, x, prob.parts));
  }
}

TEST(ZeroShot, MatchesForwardAtReference) {
  auto prob = testing::random_problem(7, {2, 2, 3, 4}, 3, 4, 0.5);
  for (const auto& x : prob.samples) {
    const auto z = zero_shot_probs(x, prob.prompt, prob.parts);
    EXPECT_EQ(z, forward_probs(prob.prompt, x, prob.parts));
    EXPECT_TRUE(ProbabilityVector::is_valid(z.values()));
  }
}

TEST(Shapes, Validation) {
  const ModelDims dims{2, 3, 2, 4};
  EXPECT_THROW(FrozenEncoder(Matrix(4, 5), dims), std::invalid_argument);
  Matrix w(4, 8, 1.0);
  for (std::size_t c = 0; c < 8; ++c) w(2, c) = 0.0;
  EXPECT_THROW(FrozenEncoder(w, dims), std::invalid_argument);
  EXPECT_THROW(ClassVocabulary({{1, 0}}, {"a"}), std::invalid_argument);
  EXPECT_THROW(ClassVocabulary({{1, 0}, {0, 0}}, {"a", "b"}), std::invalid_argument);
  EXPECT_THROW(ClassVocabulary({{1, 0}, {0, 1, 2}}, {"a", "b"}), std::invalid_argument);

  auto prob = testing::random_problem(8, dims, 3, 1, 1.0);
  EXPECT_THROW(check_prompt_shape(PromptParams(3, 3), prob.parts.encoder), std::invalid_argument);
  ImageSample bad = prob.samples[0];
  bad.embedding.push_back(1.0);
  EXPECT_THROW(forward_probs(prob.prompt, bad, prob.parts), std::invalid_argument);
  ImageSample wrong_classes{"y", prob.samples[0].embedding, OneHotLabel(0, 5)};
  EXPECT_THROW(forward_probs(prob.prompt, wrong_classes, prob.parts), std::invalid_argument);
}

TEST(Vocabulary, Slice) {
  const ClassVocabulary vocab({{1}, {2}, {3}, {4}}, {"a", "b", "c", "d"});
  const auto s = vocab.slice(1, 2);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.name(0), "b");
  EXPECT_EQ(s.token(1), Vector{3});
  EXPECT_THROW(vocab.slice(3, 2), std::out_of_range);
}

}  // namespace
}  // namespace atlas
