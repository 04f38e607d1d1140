#include "asformer/model.hpp"

#include "asformer/errors.hpp"

#include <algorithm>
#include <cmath>

namespace asformer {

void ModelConfig::validate() const {
  if (num_blocks < 1 || num_blocks > kMaxBlocks) {
    throw ConfigError("num_blocks must be in [1, " + std::to_string(kMaxBlocks) + "], got " +
                      std::to_string(num_blocks));
  }
  if (num_decoders < 0) {
    throw ConfigError("num_decoders must be >= 0, got " + std::to_string(num_decoders));
  }
  if (feature_dim < 1) throw ConfigError("feature_dim must be positive");
  if (model_dim < 1) throw ConfigError("model_dim must be positive");
  if (num_classes < 1) throw ConfigError("num_classes must be positive");
  if (!(input_dropout >= 0.0 && input_dropout < 1.0)) {
    throw ConfigError("input_dropout must be in [0, 1), got " + std::to_string(input_dropout));
  }
  if (!(alpha_decay > 0.0 && alpha_decay <= 1.0)) {
    throw ConfigError("alpha_decay must be in (0, 1], got " + std::to_string(alpha_decay));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("lambda must be a non-negative real, got " + std::to_string(lambda));
  }
}

Index window_schedule(int block, int num_blocks) {
  if (num_blocks < 1 || num_blocks > kMaxBlocks) {
    throw ConfigError("num_blocks out of range: " + std::to_string(num_blocks));
  }
  if (block < 1 || block > num_blocks) {
    throw IndexError("block index " + std::to_string(block) + " outside [1, " +
                     std::to_string(num_blocks) + "]");
  }
  return Index{1} << block;
}

double alpha_schedule(int decoder, int num_decoders, double alpha_decay) {
  if (decoder < 1 || decoder > num_decoders) {
    throw IndexError("decoder index " + std::to_string(decoder) + " outside [1, " +
                     std::to_string(num_decoders) + "]");
  }
  double alpha = 1.0;
  for (int k = 1; k < decoder; ++k) alpha *= alpha_decay;
  return alpha;
}

std::uint64_t window_score_count(Index frames, Index window) {
  const Index half = window / 2;
  std::uint64_t total = 0;
  for (Index t = 0; t < frames; ++t) {
    const Index lo = std::max<Index>(0, t - half);
    const Index hi = std::min<Index>(frames - 1, t + half);
    total += static_cast<std::uint64_t>(hi - lo + 1);
  }
  return total;
}

std::uint64_t AttentionProbe::total_scores() const {
  std::uint64_t total = 0;
  for (const auto& b : encoder_blocks) total += b.scores;
  return total;
}

Tensor Linear::forward(Tape& tape, const Tensor& x) const {
  return ops::affine(tape, x, weight, bias);
}

namespace {

AttentionResult banded_attention(Tape& tape, const Tensor& query, const Tensor& key,
                                 const Tensor& value, Index window) {
  if (window < 2 || window % 2 != 0) {
    throw ConfigError("attention window must be even and >= 2, got " + std::to_string(window));
  }
  const Index frames = query.rows();
  // Band storage never needs to exceed the sequence itself.
  const Index half = std::min<Index>(window / 2, std::max<Index>(frames - 1, 0));
  const double scale = 1.0 / std::sqrt(static_cast<double>(query.cols()));
  const BoolMatrix mask = ops::band_mask(frames, half);

  Tensor scores = ops::band_scores(tape, query, key, half, scale);
  Tensor weights = ops::masked_softmax(tape, scores, mask);
  Tensor output = ops::band_combine(tape, weights, value, half);

  AttentionResult result;
  result.output = output;
  result.weights = weights;
  result.half = half;
  result.scores = static_cast<std::uint64_t>(mask.count());
  return result;
}

void record_trace(AttentionTrace* trace, const AttentionResult& r, int block, Index window,
                  std::optional<Index> anchor) {
  if (trace == nullptr) return;
  trace->block = block;
  trace->window = window;
  trace->scores = r.scores;
  trace->anchor_row.clear();
  if (!anchor) return;
  const Index frames = r.weights.rows();
  const Index t = *anchor;
  trace->anchor_row.assign(static_cast<std::size_t>(frames), 0.0);
  for (Index c = 0; c < r.weights.cols(); ++c) {
    const Index j = t - r.half + c;
    if (j >= 0 && j < frames) trace->anchor_row[static_cast<std::size_t>(j)] = r.weights.value()(t, c);
  }
}

}  // namespace

AttentionResult windowed_self_attention(Tape& tape, const Tensor& x,
                                        const AttentionParams& params, Index window) {
  Tensor q = params.query.forward(tape, x);
  Tensor k = ops::matmul(tape, x, params.key);
  Tensor v = params.value.forward(tape, x);
  return banded_attention(tape, q, k, v, window);
}

AttentionResult windowed_cross_attention(Tape& tape, const Tensor& x, const Tensor& external,
                                         const AttentionParams& params, Index window) {
  if (x.rows() != external.rows() || x.cols() != external.cols()) {
    throw DimensionError("cross attention: decoder stream " + x.shape() +
                         " does not match external stream " + external.shape());
  }
  Tensor joint = ops::concat_cols(tape, external, x);
  Tensor q = params.query.forward(tape, joint);
  Tensor k = ops::matmul(tape, joint, params.key);
  Tensor v = params.value.forward(tape, x);
  return banded_attention(tape, q, k, v, window);
}

Tensor Block::feed_forward(Tape& tape, const Tensor& x) const {
  const int dilation = static_cast<int>(Index{1} << index);
  Tensor conv = ops::dilated_conv1d(tape, x, conv_kernel, dilation);
  return ops::relu(tape, ops::instance_norm(tape, conv, kInstanceNormEps));
}

Tensor Block::sublayers(Tape& tape, const Tensor& x, const Tensor* external, double alpha,
                        AttentionTrace* trace, std::optional<Index> anchor) const {
  const Index window = Index{1} << index;
  Tensor f = feed_forward(tape, x);
  AttentionResult att;
  if (cross) {
    if (external == nullptr) throw InternalError("decoder block needs an external stream");
    att = windowed_cross_attention(tape, f, *external, attention, window);
  } else {
    att = windowed_self_attention(tape, f, attention, window);
  }
  record_trace(trace, att, index, window, anchor);
  return ops::add(tape, ops::scale(tape, att.output, alpha), f);
}

Tensor Block::forward(Tape& tape, const Tensor& x, const Tensor* external, double alpha,
                      AttentionTrace* trace, std::optional<Index> anchor) const {
  Tensor out = sublayers(tape, x, external, alpha, trace, anchor);
  return ops::add(tape, x, mix.forward(tape, out));
}

Tensor Block::forward_without_attention(Tape& tape, const Tensor& x) const {
  return ops::add(tape, x, mix.forward(tape, feed_forward(tape, x)));
}

StageOutput Encoder::forward(Tape& tape, const Tensor& features,
                             const ForwardOptions& options) const {
  if (features.rows() == 0) throw DataError("encoder: empty input sequence (T = 0)");
  if (features.cols() != input.weight.rows()) {
    throw DimensionError("encoder: feature dimension " + std::to_string(features.cols()) +
                         " does not match model feature_dim " +
                         std::to_string(input.weight.rows()));
  }
  if (options.training && input_dropout > 0.0 && options.rng == nullptr) {
    throw ConfigError("encoder: training mode needs a random generator");
  }
  std::mt19937_64 unused;
  Tensor x = ops::channel_dropout(tape, features, input_dropout, options.training,
                                  options.rng != nullptr ? *options.rng : unused);
  Tensor h = input.forward(tape, x);

  AttentionProbe* probe = options.probe;
  if (probe != nullptr) {
    if (probe->anchor_frame && (*probe->anchor_frame < 0 || *probe->anchor_frame >= features.rows())) {
      throw IndexError("anchor frame " + std::to_string(*probe->anchor_frame) + " outside [0, " +
                       std::to_string(features.rows()) + ")");
    }
    probe->encoder_blocks.assign(blocks.size(), AttentionTrace{});
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    AttentionTrace* trace = probe != nullptr ? &probe->encoder_blocks[i] : nullptr;
    h = blocks[i].forward(tape, h, nullptr, 1.0, trace,
                          probe != nullptr ? probe->anchor_frame : std::nullopt);
  }
  return StageOutput{output.forward(tape, h), h};
}

StageOutput Decoder::forward(Tape& tape, const Tensor& probs, const Tensor& external,
                             double alpha, bool ablate_attention) const {
  if (probs.cols() != input.weight.rows()) {
    throw DimensionError("decoder: input " + probs.shape() + " has wrong class count, expected " +
                         std::to_string(input.weight.rows()));
  }
  const Matrix& p = probs.value();
  for (Index t = 0; t < p.rows(); ++t) {
    const double total = p.row(t).sum();
    if (std::abs(total - 1.0) > 1e-4 || p.row(t).minCoeff() < 0.0) {
      throw DataError("decoder: input row " + std::to_string(t) +
                      " is not a probability vector (sum " + std::to_string(total) + ")");
    }
  }
  Tensor h = input.forward(tape, probs);
  for (const Block& block : blocks) {
    h = ablate_attention ? block.forward_without_attention(tape, h)
                         : block.forward(tape, h, &external, alpha);
  }
  return StageOutput{output.forward(tape, h), h};
}

namespace {

Linear make_linear(Index in, Index out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix w(in, out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  Matrix b(1, out);
  for (Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
  return Linear{Tensor::parameter(std::move(w)), Tensor::parameter(std::move(b))};
}

Tensor make_weight(Index rows, Index cols, Index fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix w(rows, cols);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  return Tensor::parameter(std::move(w));
}

Block make_block(int index, bool cross, Index dim, std::mt19937_64& rng) {
  Block b;
  b.index = index;
  b.cross = cross;
  b.conv_kernel = make_weight(kConvKernelSize * dim, dim, kConvKernelSize * dim, rng);
  const Index qk_in = cross ? 2 * dim : dim;
  b.attention.query = make_linear(qk_in, dim, rng);
  b.attention.key = make_weight(qk_in, dim, qk_in, rng);
  b.attention.value = make_linear(dim, dim, rng);
  b.mix = make_linear(dim, dim, rng);
  return b;
}

void append_linear(std::vector<NamedParameter>& out, const std::string& prefix, const Linear& l) {
  out.push_back({prefix + ".weight", l.weight});
  out.push_back({prefix + ".bias", l.bias});
}

void append_block(std::vector<NamedParameter>& out, const std::string& prefix, const Block& b) {
  out.push_back({prefix + ".conv.kernel", b.conv_kernel});
  append_linear(out, prefix + ".attn.query", b.attention.query);
  out.push_back({prefix + ".attn.key.weight", b.attention.key});
  append_linear(out, prefix + ".attn.value", b.attention.value);
  append_linear(out, prefix + ".mix", b.mix);
}

}  // namespace

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const Index d = config_.model_dim;

  encoder_.input_dropout = config_.input_dropout;
  encoder_.input = make_linear(config_.feature_dim, d, rng);
  for (int i = 1; i <= config_.num_blocks; ++i) encoder_.blocks.push_back(make_block(i, false, d, rng));
  encoder_.output = make_linear(d, config_.num_classes, rng);

  for (int k = 0; k < config_.num_decoders; ++k) {
    Decoder dec;
    dec.input = make_linear(config_.num_classes, d, rng);
    for (int i = 1; i <= config_.num_blocks; ++i) dec.blocks.push_back(make_block(i, true, d, rng));
    dec.output = make_linear(d, config_.num_classes, rng);
    decoders_.push_back(std::move(dec));
  }
}

Model Model::clone() const {
  Model copy(config_, 0);
  auto src = parameters();
  auto dst = copy.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i].tensor.mutable_value() = src[i].tensor.value();
  return copy;
}

std::vector<NamedParameter> Model::parameters() const {
  std::vector<NamedParameter> out;
  append_linear(out, "encoder.input", encoder_.input);
  for (const Block& b : encoder_.blocks) append_block(out, "encoder.block" + std::to_string(b.index), b);
  append_linear(out, "encoder.output", encoder_.output);
  for (std::size_t k = 0; k < decoders_.size(); ++k) {
    const std::string prefix = "decoder" + std::to_string(k + 1);
    append_linear(out, prefix + ".input", decoders_[k].input);
    for (const Block& b : decoders_[k].blocks) append_block(out, prefix + ".block" + std::to_string(b.index), b);
    append_linear(out, prefix + ".output", decoders_[k].output);
  }
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += static_cast<std::size_t>(p.tensor.size());
  return n;
}

StagePredictions Model::forward(Tape& tape, const Tensor& features,
                                const ForwardOptions& options) const {
  StagePredictions preds;
  StageOutput prev = encoder_.forward(tape, features, options);
  preds.stages.push_back({"encoder", prev.logits});
  for (std::size_t k = 0; k < decoders_.size(); ++k) {
    const int index = static_cast<int>(k) + 1;
    const double alpha = alpha_schedule(index, config_.num_decoders, config_.alpha_decay);
    Tensor probs = ops::softmax_rows(tape, prev.logits);
    prev = decoders_[k].forward(tape, probs, prev.feature, alpha);
    preds.stages.push_back({"decoder" + std::to_string(index), prev.logits});
  }
  return preds;
}

namespace {

std::vector<int> row_argmax(const Matrix& logits) {
  std::vector<int> labels(static_cast<std::size_t>(logits.rows()));
  for (Index t = 0; t < logits.rows(); ++t) {
    Index best = 0;
    logits.row(t).maxCoeff(&best);
    labels[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return labels;
}

}  // namespace

std::vector<int> predict_labels(const Model& model, const Matrix& features) {
  Tape tape = Tape::inference();
  return row_argmax(model.forward(tape, Tensor::constant(features)).final_logits().value());
}

std::vector<std::vector<int>> predict_all_stages(const Model& model, const Matrix& features) {
  Tape tape = Tape::inference();
  const StagePredictions preds = model.forward(tape, Tensor::constant(features));
  std::vector<std::vector<int>> out;
  for (const Stage& s : preds.stages) out.push_back(row_argmax(s.logits.value()));
  return out;
}

}  // namespace asformer
