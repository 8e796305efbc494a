// SPDX-License-Identifier: Apache-2.0
//
// Fixtures shared by the unit and acceptance tests.

#ifndef ATLAS_TESTS_SUPPORT_HPP
#define ATLAS_TESTS_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "atlas/model.hpp"
#include "atlas/numerics.hpp"

namespace atlas::testing {

/// Sets ATLAS_OPT_THREADS for the lifetime of the guard.
class ThreadsEnv {
 public:
  explicit ThreadsEnv(const std::string& value) {
    if (const char* old = std::getenv("ATLAS_OPT_THREADS")) {
      had_ = true;
      old_ = old;
    }
    ::setenv("ATLAS_OPT_THREADS", value.c_str(), 1);
  }
  ~ThreadsEnv() {
    if (had_) {
      ::setenv("ATLAS_OPT_THREADS", old_.c_str(), 1);
    } else {
      ::unsetenv("ATLAS_OPT_THREADS");
    }
  }
  ThreadsEnv(const ThreadsEnv&) = delete;
  ThreadsEnv& operator=(const ThreadsEnv&) = delete;

 private:
  bool had_ = false;
  std::string old_;
};

inline Vector random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Vector v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

/// Strictly positive entries normalized to one.
inline ProbabilityVector random_distribution(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Vector v(n);
  double s = 0.0;
  for (double& x : v) s += (x = u(rng));
  for (double& x : v) x /= s;
  return ProbabilityVector(v);
}

/// A small classifier with random frozen parts.
struct RandomProblem {
  ModelParts parts;
  PromptParams prompt;
  std::vector<ImageSample> samples;
};

inline RandomProblem random_problem(std::uint64_t seed, ModelDims dims, std::size_t classes,
                                    std::size_t num_samples, double tau, double prompt_scale = 0.5) {
  std::mt19937_64 rng(seed);
  auto encoder = FrozenEncoder::random(dims, seed);
  std::vector<Vector> tokens;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) {
    tokens.push_back(random_vector(rng, dims.token_dim));
    names.push_back("class" + std::to_string(c));
  }
  RandomProblem p{ModelParts{std::move(encoder), ClassVocabulary(std::move(tokens), std::move(names)),
                             ModelConfig{tau}},
                  PromptParams(dims.prompt_length, dims.prompt_dim,
                               random_vector(rng, dims.prompt_size(), prompt_scale)),
                  {}};
  std::uniform_int_distribution<std::size_t> label(0, classes - 1);
  for (std::size_t i = 0; i < num_samples; ++i) {
    p.samples.push_back({"s" + std::to_string(i), random_vector(rng, dims.embed_dim),
                         OneHotLabel(label(rng), classes)});
  }
  return p;
}

/// Five-point central difference of f along every coordinate of x.
inline Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, Vector x,
                                         double h = 1e-4) {
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    const auto at = [&](double offset) {
      x[i] = x0 + offset;
      const double v = f(x);
      x[i] = x0;
      return v;
    };
    g[i] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(max_i |b_i|, floor)
inline double max_relative_error(const Vector& a, const Vector& b, double floor = 1e-8) {
  double diff = 0.0;
  double scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / scale;
}

}  // namespace atlas::testing

#endif  // ATLAS_TESTS_SUPPORT_HPP
