#pragma once

#include "asformer/data_io.hpp"
#include "asformer/model.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace asformer {

inline constexpr double kProbabilityFloor = 1e-12;

/// mean_t -log(max(softmax(logits)(t, label_t), 1e-12)).
Tensor classification_loss(Tape& tape, const Tensor& logits, std::span<const int> labels);

/// Mean squared adjacent-frame difference of softmax(logits) over T*C; 0 for T = 1.
Tensor smoothing_loss(Tape& tape, const Tensor& logits);

struct LossBreakdown {
  std::vector<double> classification;  // per stage
  std::vector<double> smoothing;       // per stage
  double total = 0.0;
  Tensor total_tensor;

  double classification_sum() const;
  double smoothing_sum() const;
};

/// Sum over stages of classification + lambda * smoothing.
LossBreakdown total_loss(Tape& tape, const StagePredictions& stages, std::span<const int> labels,
                         double lambda);

struct AdamSettings {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamSettings settings = {});

  /// One bias-corrected update from the parameters' current gradients
  /// (absent gradients count as zero), then clears them.
  void step();

  std::uint64_t steps() const noexcept { return step_; }
  const AdamSettings& settings() const noexcept { return settings_; }
  const std::vector<Matrix>& first_moments() const noexcept { return m_; }
  const std::vector<Matrix>& second_moments() const noexcept { return v_; }

 private:
  std::vector<Tensor> params_;
  AdamSettings settings_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::uint64_t step_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double total_loss = 0.0;
  double cls_loss = 0.0;
  double smo_loss = 0.0;
  double train_acc = 0.0;
};

struct TrainOptions {
  int epochs = 120;
  AdamSettings adam;
  std::uint64_t seed = 0;
  // Called after each epoch, e.g. for progress output.
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Checks every sequence against the model dimensions before training.
void check_dataset(const Dataset& data, const ModelConfig& config);

/// Batch size 1: each epoch visits the sequences in a seeded shuffled order
/// and takes one optimizer step per sequence. Losses and accuracy (final
/// stage, training mode) are averaged over the epoch's sequences.
std::vector<EpochRecord> fit(Model& model, const Dataset& data, const TrainOptions& options);

void write_training_log(std::ostream& out, const std::vector<EpochRecord>& log);

}  // namespace asformer
