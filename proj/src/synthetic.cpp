#include "asformer/synthetic.hpp"

#include "asformer/errors.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

namespace asformer {

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (feature_dim < 1) throw ConfigError("synthetic feature_dim must be positive");
  if (transition.rows() != num_classes || transition.cols() != num_classes) {
    throw ConfigError("transition matrix must be " + shape_string(num_classes, num_classes) +
                      ", got " + shape_string(transition.rows(), transition.cols()));
  }
  for (Index r = 0; r < transition.rows(); ++r) {
    if (transition(r, r) != 0.0) {
      throw ConfigError("transition matrix diagonal must be zero (row " + std::to_string(r) + ")");
    }
    if (transition.row(r).minCoeff() < 0.0) {
      throw ConfigError("transition matrix row " + std::to_string(r) + " has a negative entry");
    }
    if (std::abs(transition.row(r).sum() - 1.0) > 1e-9) {
      throw ConfigError("transition matrix row " + std::to_string(r) + " does not sum to 1");
    }
  }
  if (min_len < 1 || max_len < min_len) {
    throw ConfigError("segment length range must satisfy 1 <= min_len <= max_len");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(mean_scale > 0.0)) throw ConfigError("mean_scale must be > 0");
}

Matrix SyntheticSpec::grammar_transition(int num_classes, double order) {
  if (num_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  Matrix m = Matrix::Zero(num_classes, num_classes);
  const int others = num_classes - 2;
  for (int c = 0; c < num_classes; ++c) {
    const int next = (c + 1) % num_classes;
    if (others == 0) {
      m(c, next) = 1.0;
      continue;
    }
    m(c, next) = order;
    for (int j = 0; j < num_classes; ++j) {
      if (j != c && j != next) m(c, j) = (1.0 - order) / others;
    }
  }
  return m;
}

SyntheticSpec SyntheticSpec::tuned(int num_classes, int feature_dim, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_classes = num_classes;
  spec.feature_dim = feature_dim;
  spec.transition = grammar_transition(num_classes);
  spec.seed = seed;
  spec.noise_sigma = tune_noise_sigma(class_means(spec), 0.9);
  return spec;
}

Matrix class_means(const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix means(spec.num_classes, spec.feature_dim);
  for (Index i = 0; i < means.size(); ++i) means.data()[i] = spec.mean_scale * normal(rng);
  return means;
}

namespace {

// For a sample x = m_c + sigma * z, ||x - m_k||^2 - ||x - m_c||^2 equals
// gap(k) + 2 * sigma * (z . m_c - z . m_k), so one noise draw per sample
// serves every sigma.
class NoiseProbe {
 public:
  NoiseProbe(const Matrix& means, int samples_per_class, std::uint64_t seed) : means_(means) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index classes = means.rows();
    gaps_.resize(classes);
    proj_.resize(classes);
    for (Index c = 0; c < classes; ++c) {
      Matrix z(samples_per_class, means.cols());
      for (Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
      proj_[c] = z * means.transpose();  // [samples x C]
      gaps_[c] = (means.rowwise() - means.row(c)).rowwise().squaredNorm().transpose();
    }
  }

  double accuracy(double sigma) const {
    std::size_t correct = 0, total = 0;
    for (std::size_t c = 0; c < proj_.size(); ++c) {
      const Index own = static_cast<Index>(c);
      for (Index s = 0; s < proj_[c].rows(); ++s) {
        Index best = 0;
        double best_score = 0.0;
        for (Index k = 0; k < means_.rows(); ++k) {
          const double score = gaps_[c](0, k) + 2.0 * sigma * (proj_[c](s, own) - proj_[c](s, k));
          if (k == 0 || score < best_score) {
            best = k;
            best_score = score;
          }
        }
        correct += best == own ? 1 : 0;
        ++total;
      }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
  }

 private:
  const Matrix& means_;
  std::vector<Matrix> gaps_;
  std::vector<Matrix> proj_;
};

}  // namespace

double nearest_mean_accuracy(const Matrix& means, double sigma, int samples_per_class,
                             std::uint64_t seed) {
  return NoiseProbe(means, samples_per_class, seed).accuracy(sigma);
}

double tune_noise_sigma(const Matrix& means, double target_accuracy) {
  const NoiseProbe probe(means, 2000, 0x5eed);
  double lo = 0.0;
  double hi = 1.0;
  while (probe.accuracy(hi) > target_accuracy && hi < 1e6) hi *= 2.0;
  for (int iter = 0; iter < 30; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (probe.accuracy(mid) > target_accuracy) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Dataset generate_synthetic(const SyntheticSpec& spec, int num_sequences, Index min_frames,
                           Index max_frames, std::uint64_t stream) {
  spec.validate();
  if (num_sequences < 0) throw ConfigError("num_sequences must be >= 0");
  if (min_frames < 1 || max_frames < min_frames) {
    throw ConfigError("sequence length range must satisfy 1 <= min <= max");
  }
  const Matrix means = class_means(spec);
  std::vector<std::discrete_distribution<int>> next_label;
  for (Index c = 0; c < spec.num_classes; ++c) {
    const auto row = spec.transition.row(c);
    next_label.emplace_back(row.data(), row.data() + row.size());
  }

  Dataset data;
  for (int i = 0; i < num_sequences; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<Index> frames_dist(min_frames, max_frames);
    std::uniform_int_distribution<int> len_dist(spec.min_len, spec.max_len);
    std::uniform_int_distribution<int> first_label(0, spec.num_classes - 1);
    std::normal_distribution<double> normal(0.0, 1.0);

    const Index frames = frames_dist(rng);
    LabeledSequence s;
    char name[48];
    std::snprintf(name, sizeof(name), "synth_s%llu_%04d", static_cast<unsigned long long>(stream), i);
    s.name = name;
    s.labels.reserve(static_cast<std::size_t>(frames));
    int label = first_label(rng);
    while (static_cast<Index>(s.labels.size()) < frames) {
      const Index len = std::min<Index>(len_dist(rng), frames - static_cast<Index>(s.labels.size()));
      s.labels.insert(s.labels.end(), static_cast<std::size_t>(len), label);
      label = next_label[static_cast<std::size_t>(label)](rng);
    }
    s.features.resize(frames, spec.feature_dim);
    for (Index t = 0; t < frames; ++t) {
      const int c = s.labels[static_cast<std::size_t>(t)];
      for (Index j = 0; j < spec.feature_dim; ++j) {
        s.features(t, j) = means(c, j) + spec.noise_sigma * normal(rng);
      }
    }
    data.push_back(std::move(s));
  }
  return data;
}

}  // namespace asformer
