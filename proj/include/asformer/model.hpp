#pragma once

#include "asformer/ops.hpp"
#include "asformer/tensor.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace asformer {

struct ModelConfig {
  int num_blocks = 9;
  int num_decoders = 3;
  int feature_dim = 2048;
  int model_dim = 64;
  int num_classes = 1;
  double input_dropout = 0.3;
  double alpha_decay = 0.5;
  double lambda = 0.25;

  // Throws ConfigError on the first violated constraint.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

inline constexpr int kConvKernelSize = 3;
inline constexpr double kInstanceNormEps = 1e-5;
inline constexpr int kMaxBlocks = 30;

/// Window width of attention block `block` (1-based); also its dilation rate.
Index window_schedule(int block, int num_blocks);

/// Residual weight of decoder `decoder` (1-based): alpha_decay^(decoder-1).
double alpha_schedule(int decoder, int num_decoders, double alpha_decay);

/// Number of in-window (frame, key) pairs for a centered window of width
/// `window` over `frames` frames.
std::uint64_t window_score_count(Index frames, Index window);

/// Score count recorded for one attention layer during a forward pass.
struct AttentionTrace {
  int block = 0;
  Index window = 0;
  std::uint64_t scores = 0;
  // Attention row of the probe's anchor frame over all T frames; zero
  // outside the window.
  std::vector<double> anchor_row;
};

struct AttentionProbe {
  std::optional<Index> anchor_frame;
  std::vector<AttentionTrace> encoder_blocks;

  std::uint64_t total_scores() const;
};

struct Linear {
  Tensor weight;
  Tensor bias;

  Tensor forward(Tape& tape, const Tensor& x) const;
};

/// Single-head projections. The key projection carries no bias: a key bias
/// adds the same amount to every score of a query row and cancels in softmax.
struct AttentionParams {
  Linear query;
  Tensor key;
  Linear value;
};

struct AttentionResult {
  Tensor output;
  Tensor weights;  // banded [T x (2*half+1)], see ops::band_scores
  Index half = 0;
  std::uint64_t scores = 0;
};

/// Frame t attends to frames j with |j - t| <= window/2, clipped at the
/// sequence bounds; scores are scaled by 1/sqrt(d).
AttentionResult windowed_self_attention(Tape& tape, const Tensor& x,
                                        const AttentionParams& params, Index window);

/// Query and key are projected from [external || x]; value from x alone.
AttentionResult windowed_cross_attention(Tape& tape, const Tensor& x, const Tensor& external,
                                         const AttentionParams& params, Index window);

/// One encoder or decoder block:
///   f = relu(instance_norm(conv(x)))
///   out = alpha * attention(f) + f
///   y = x + mix(out)
struct Block {
  int index = 1;
  bool cross = false;
  Tensor conv_kernel;
  AttentionParams attention;
  Linear mix;

  Tensor feed_forward(Tape& tape, const Tensor& x) const;
  // Returns out = alpha * attention(f) + f for f = feed_forward(x).
  Tensor sublayers(Tape& tape, const Tensor& x, const Tensor* external, double alpha,
                   AttentionTrace* trace, std::optional<Index> anchor) const;
  Tensor forward(Tape& tape, const Tensor& x, const Tensor* external, double alpha,
                 AttentionTrace* trace = nullptr,
                 std::optional<Index> anchor = std::nullopt) const;
  // The block with its attention sublayer removed: x + mix(f).
  Tensor forward_without_attention(Tape& tape, const Tensor& x) const;
};

struct StageOutput {
  Tensor logits;
  Tensor feature;
};

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* rng = nullptr;
  AttentionProbe* probe = nullptr;
};

class Encoder {
 public:
  Linear input;
  std::vector<Block> blocks;
  Linear output;
  double input_dropout = 0.3;

  StageOutput forward(Tape& tape, const Tensor& features, const ForwardOptions& options) const;
};

class Decoder {
 public:
  Linear input;
  std::vector<Block> blocks;
  Linear output;

  /// `probs` rows must be probability vectors (checked to 1e-4).
  StageOutput forward(Tape& tape, const Tensor& probs, const Tensor& external, double alpha,
                      bool ablate_attention = false) const;
};

struct Stage {
  std::string name;
  Tensor logits;
};

/// Stage 0 is the encoder; stages 1..K the decoders in chain order.
struct StagePredictions {
  std::vector<Stage> stages;

  const Tensor& final_logits() const { return stages.back().logits; }
  Index frames() const { return stages.front().logits.rows(); }
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

class Model {
 public:
  /// Parameters drawn from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) in
  /// declaration order from a generator seeded with `seed`.
  Model(const ModelConfig& config, std::uint64_t seed);

  // Copies would alias parameter storage; use clone() for an independent copy.
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  Model clone() const;

  const ModelConfig& config() const noexcept { return config_; }
  const Encoder& encoder() const noexcept { return encoder_; }
  const std::vector<Decoder>& decoders() const noexcept { return decoders_; }

  StagePredictions forward(Tape& tape, const Tensor& features,
                           const ForwardOptions& options = {}) const;

  /// Stable, checkpoint-order list; tensors alias the model's storage.
  std::vector<NamedParameter> parameters() const;
  std::size_t parameter_count() const;

 private:
  ModelConfig config_;
  Encoder encoder_;
  std::vector<Decoder> decoders_;
};

/// Per-frame argmax of the final stage.
std::vector<int> predict_labels(const Model& model, const Matrix& features);
std::vector<std::vector<int>> predict_all_stages(const Model& model, const Matrix& features);

}  // namespace asformer
