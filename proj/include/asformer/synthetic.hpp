#pragma once

#include "asformer/data_io.hpp"
#include "asformer/tensor.hpp"

#include <cstdint>

namespace asformer {

/// Markov-chain segment generator with Gaussian class-conditional features.
struct SyntheticSpec {
  int num_classes = 5;
  int feature_dim = 32;
  // Row-stochastic [C x C] with a zero diagonal.
  Matrix transition;
  int min_len = 20;
  int max_len = 80;
  double noise_sigma = 1.0;
  double mean_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;

  /// Mostly-ordered activity grammar: from class c the next segment is
  /// c+1 (mod C) with probability `order`, any other class otherwise.
  static Matrix grammar_transition(int num_classes, double order = 0.7);

  /// Defaults with the grammar transition matrix and noise tuned so the
  /// frame-level Bayes (nearest class mean) accuracy is about 90%.
  static SyntheticSpec tuned(int num_classes, int feature_dim, std::uint64_t seed);
};

/// Per-class mean feature vectors [C x D], drawn once from the spec seed.
Matrix class_means(const SyntheticSpec& spec);

/// Monte-Carlo accuracy of the nearest-class-mean rule at noise level sigma.
double nearest_mean_accuracy(const Matrix& means, double sigma, int samples_per_class,
                             std::uint64_t seed);

/// Smallest-error bisection on sigma so nearest_mean_accuracy ~= target.
double tune_noise_sigma(const Matrix& means, double target_accuracy);

/// Sequence `i` of stream `stream` depends only on (spec, stream, i), so a
/// held-out split is a different stream over the same class means.
Dataset generate_synthetic(const SyntheticSpec& spec, int num_sequences, Index min_frames,
                           Index max_frames, std::uint64_t stream = 0);

}  // namespace asformer
