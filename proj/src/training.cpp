#include "asformer/training.hpp"

#include "asformer/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace asformer {

Tensor classification_loss(Tape& tape, const Tensor& logits, std::span<const int> labels) {
  return ops::nll_clamped(tape, ops::softmax_rows(tape, logits), labels, kProbabilityFloor);
}

Tensor smoothing_loss(Tape& tape, const Tensor& logits) {
  return ops::adjacent_sq_diff_mean(tape, ops::softmax_rows(tape, logits));
}

double LossBreakdown::classification_sum() const {
  return std::accumulate(classification.begin(), classification.end(), 0.0);
}

double LossBreakdown::smoothing_sum() const {
  return std::accumulate(smoothing.begin(), smoothing.end(), 0.0);
}

LossBreakdown total_loss(Tape& tape, const StagePredictions& stages, std::span<const int> labels,
                         double lambda) {
  if (stages.stages.empty()) throw InternalError("total_loss: no stages");
  LossBreakdown out;
  Tensor total;
  for (const Stage& stage : stages.stages) {
    if (stage.logits.rows() != static_cast<Index>(labels.size())) {
      throw DataError("total_loss: stage '" + stage.name + "' has " +
                      std::to_string(stage.logits.rows()) + " frames but " +
                      std::to_string(labels.size()) + " labels");
    }
    Tensor cls = classification_loss(tape, stage.logits, labels);
    Tensor smo = smoothing_loss(tape, stage.logits);
    out.classification.push_back(cls.item());
    out.smoothing.push_back(smo.item());
    Tensor stage_loss = ops::add(tape, cls, ops::scale(tape, smo, lambda));
    total = total.defined() ? ops::add(tape, total, stage_loss) : stage_loss;
  }
  out.total_tensor = total;
  out.total = total.item();
  return out;
}

Adam::Adam(std::vector<Tensor> params, AdamSettings settings)
    : params_(std::move(params)), settings_(settings) {
  if (!(settings_.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(settings_.beta1 >= 0.0 && settings_.beta1 < 1.0) ||
      !(settings_.beta2 >= 0.0 && settings_.beta2 < 1.0)) {
    throw ConfigError("Adam betas must be in [0, 1)");
  }
  if (!(settings_.eps > 0.0)) throw ConfigError("Adam eps must be positive");
  for (const Tensor& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step() {
  ++step_;
  const double b1 = settings_.beta1;
  const double b2 = settings_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (p.has_grad() && (p.grad().rows() != m_[i].rows() || p.grad().cols() != m_[i].cols())) {
      throw InternalError("Adam: gradient shape does not match parameter " + p.shape());
    }
    const Matrix g = p.has_grad() ? p.grad() : Matrix::Zero(p.rows(), p.cols());
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseAbs2();
    // Zero moments give a zero update, so untouched entries stay bit-identical.
    p.mutable_value().array() -= settings_.learning_rate * (m_[i].array() / correction1) /
                                 ((v_[i].array() / correction2).sqrt() + settings_.eps);
    p.zero_grad();
  }
}

void check_dataset(const Dataset& data, const ModelConfig& config) {
  if (data.empty()) throw DataError("training dataset is empty");
  for (const auto& seq : data) {
    if (seq.features.rows() == 0) throw DataError("sequence '" + seq.name + "' is empty");
    if (seq.features.cols() != config.feature_dim) {
      throw DimensionError("sequence '" + seq.name + "' has feature dimension " +
                           std::to_string(seq.features.cols()) + ", model expects " +
                           std::to_string(config.feature_dim));
    }
    if (static_cast<Index>(seq.labels.size()) != seq.features.rows()) {
      throw DataError("sequence '" + seq.name + "' has " + std::to_string(seq.labels.size()) +
                      " labels for " + std::to_string(seq.features.rows()) + " frames");
    }
    for (std::size_t t = 0; t < seq.labels.size(); ++t) {
      if (seq.labels[t] < 0 || seq.labels[t] >= config.num_classes) {
        throw DataError("sequence '" + seq.name + "' frame " + std::to_string(t) + " has label " +
                        std::to_string(seq.labels[t]) + " outside [0, " +
                        std::to_string(config.num_classes) + ")");
      }
    }
  }
}

std::vector<EpochRecord> fit(Model& model, const Dataset& data, const TrainOptions& options) {
  if (options.epochs < 0) throw ConfigError("epochs must be >= 0");
  check_dataset(data, model.config());

  std::vector<Tensor> params;
  for (const auto& p : model.parameters()) params.push_back(p.tensor);
  Adam adam(params, options.adam);

  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochRecord> log;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t correct = 0;
    std::size_t frames = 0;
    for (std::size_t idx : order) {
      const LabeledSequence& seq = data[idx];
      Tape tape;
      ForwardOptions fwd;
      fwd.training = true;
      fwd.rng = &rng;
      const StagePredictions preds = model.forward(tape, Tensor::constant(seq.features), fwd);
      const LossBreakdown loss = total_loss(tape, preds, seq.labels, model.config().lambda);
      tape.backward(loss.total_tensor);
      adam.step();

      rec.total_loss += loss.total;
      rec.cls_loss += loss.classification_sum();
      rec.smo_loss += loss.smoothing_sum();
      const Matrix& logits = preds.final_logits().value();
      for (Index t = 0; t < logits.rows(); ++t) {
        Index best = 0;
        logits.row(t).maxCoeff(&best);
        correct += best == seq.labels[static_cast<std::size_t>(t)] ? 1 : 0;
      }
      frames += seq.labels.size();
    }
    const double n = static_cast<double>(data.size());
    rec.total_loss /= n;
    rec.cls_loss /= n;
    rec.smo_loss /= n;
    rec.train_acc = 100.0 * static_cast<double>(correct) / static_cast<double>(frames);
    log.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  return log;
}

void write_training_log(std::ostream& out, const std::vector<EpochRecord>& log) {
  out << "epoch,total_loss,cls_loss,smo_loss,train_acc\n";
  const auto old_precision = out.precision(10);
  for (const auto& r : log) {
    out << r.epoch << ',' << r.total_loss << ',' << r.cls_loss << ',' << r.smo_loss << ','
        << r.train_acc << '\n';
  }
  out.precision(old_precision);
}

}  // namespace asformer
