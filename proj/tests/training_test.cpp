#include "asformer/errors.hpp"
#include "asformer/synthetic.hpp"
#include "asformer/training.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace asformer {
namespace {

Tensor logits_from_probs(const Matrix& probs) { return Tensor::constant(probs.array().log().matrix()); }

StagePredictions stages_of(const Tensor& logits, int count) {
  StagePredictions p;
  for (int i = 0; i < count; ++i) p.stages.push_back({"s" + std::to_string(i), logits});
  return p;
}

Dataset tiny_dataset(int sequences = 3) {
  SyntheticSpec spec = SyntheticSpec::tuned(3, 6, 21);
  spec.min_len = 4;
  spec.max_len = 10;
  return generate_synthetic(spec, sequences, 20, 30);
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.num_blocks = 2;
  c.num_decoders = 1;
  c.feature_dim = 6;
  c.model_dim = 8;
  c.num_classes = 3;
  return c;
}

TEST(ClassificationLoss, UniformLogitsGiveLogC) {
  Tape tape;
  const std::vector<int> labels = {0, 1, 2, 3, 3};
  EXPECT_NEAR(classification_loss(tape, Tensor::zeros(5, 4), labels).item(), std::log(4.0), 1e-12);
}

TEST(ClassificationLoss, ConfidentCorrectIsNearZero) {
  Matrix logits = Matrix::Constant(3, 4, -30.0);
  const std::vector<int> labels = {2, 0, 3};
  for (Index t = 0; t < 3; ++t) logits(t, labels[static_cast<std::size_t>(t)]) = 30.0;
  Tape tape;
  EXPECT_LT(classification_loss(tape, Tensor::constant(logits), labels).item(), 1e-20);
}

TEST(ClassificationLoss, HandComputedPair) {
  Matrix probs(2, 2);
  probs << 0.8, 0.2, 0.4, 0.6;
  const std::vector<int> labels = {0, 1};
  Tape tape;
  EXPECT_NEAR(classification_loss(tape, logits_from_probs(probs), labels).item(),
              -(std::log(0.8) + std::log(0.6)) / 2.0, 1e-12);
  EXPECT_NEAR(-(std::log(0.8) + std::log(0.6)) / 2.0, 0.3670, 1e-4);
}

TEST(ClassificationLoss, ProbabilityIsClamped) {
  Matrix logits(1, 2);
  logits << 0.0, -2000.0;
  const std::vector<int> labels = {1};
  Tape tape;
  EXPECT_NEAR(classification_loss(tape, Tensor::constant(logits), labels).item(),
              -std::log(kProbabilityFloor), 1e-9);
}

TEST(SmoothingLoss, TimeConstantIsExactlyZero) {
  std::mt19937_64 rng(1);
  const Matrix row = oracle::random_matrix(1, 5, rng);
  Tape tape;
  EXPECT_EQ(smoothing_loss(tape, Tensor::constant(row.replicate(9, 1))).item(), 0.0);
  EXPECT_EQ(smoothing_loss(tape, Tensor::constant(row)).item(), 0.0);
}

TEST(SmoothingLoss, HandComputedPair) {
  Matrix probs(2, 2);
  probs << 1.0, 0.0, 0.0, 1.0;
  Tape tape;
  EXPECT_EQ(ops::adjacent_sq_diff_mean(tape, Tensor::constant(probs)).item(), 0.5);
  Matrix logits(2, 2);
  logits << 60.0, -60.0, -60.0, 60.0;
  EXPECT_NEAR(smoothing_loss(tape, Tensor::constant(logits)).item(), 0.5, 1e-12);
}

TEST(SmoothingLoss, PerFrameShiftInvariance) {
  std::mt19937_64 rng(2);
  const Matrix logits = oracle::random_matrix(8, 3, rng);
  Matrix shifted = logits;
  for (Index t = 0; t < 8; ++t) shifted.row(t).array() += 10.0 * static_cast<double>(t) - 17.0;
  Tape tape;
  EXPECT_NEAR(smoothing_loss(tape, Tensor::constant(logits)).item(),
              smoothing_loss(tape, Tensor::constant(shifted)).item(), 1e-12);
}

TEST(TotalLoss, HandComposedTwoFrameInstance) {
  Matrix probs(2, 2);
  probs << 0.8, 0.2, 0.4, 0.6;
  const std::vector<int> labels = {0, 1};
  Tape tape;
  const auto loss = total_loss(tape, stages_of(logits_from_probs(probs), 1), labels, 0.25);
  const double cls = -(std::log(0.8) + std::log(0.6)) / 2.0;
  const double smo = (0.4 * 0.4 + 0.4 * 0.4) / 4.0;
  EXPECT_NEAR(loss.classification[0], cls, 1e-12);
  EXPECT_NEAR(loss.smoothing[0], smo, 1e-12);
  EXPECT_NEAR(loss.total, cls + 0.25 * smo, 1e-12);
}

TEST(TotalLoss, LambdaZeroAndStageSum) {
  std::mt19937_64 rng(3);
  const Tensor logits = Tensor::constant(oracle::random_matrix(6, 3, rng));
  const std::vector<int> labels = {0, 0, 1, 2, 2, 1};
  Tape tape;
  const auto single = total_loss(tape, stages_of(logits, 1), labels, 0.25);
  const auto four = total_loss(tape, stages_of(logits, 4), labels, 0.25);
  const auto no_smooth = total_loss(tape, stages_of(logits, 4), labels, 0.0);
  EXPECT_NEAR(four.total, 4.0 * single.total, 1e-12);
  EXPECT_NEAR(no_smooth.total, no_smooth.classification_sum(), 1e-12);
  EXPECT_GE(single.total, 0.0);
}

TEST(TotalLoss, LengthMismatchIsDataError) {
  Tape tape;
  const std::vector<int> labels = {0, 1};
  EXPECT_THROW(total_loss(tape, stages_of(Tensor::zeros(3, 2), 1), labels, 0.25), DataError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p = Tensor::parameter(Matrix::Constant(1, 1, 2.0));
  Adam adam({p});
  Tape tape;
  tape.backward(ops::sum(tape, p));
  adam.step();
  EXPECT_NEAR(p.value()(0, 0) - 2.0, -5e-4, 1e-10);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, ZeroGradientLeavesParametersBitIdentical) {
  std::mt19937_64 rng(4);
  const Matrix init = oracle::random_matrix(3, 2, rng);
  Tensor p = Tensor::parameter(init);
  Adam adam({p});
  for (int i = 0; i < 3; ++i) {
    p.grad_buffer() = Matrix::Zero(3, 2);
    adam.step();
  }
  EXPECT_EQ(p.value(), init);
}

TEST(Adam, MomentsDecayWithoutGradient) {
  Tensor p = Tensor::parameter(Matrix::Zero(1, 1));
  Adam adam({p});
  Tape tape;
  tape.backward(ops::sum(tape, p));
  adam.step();
  const double m1 = adam.first_moments()[0](0, 0);
  const double v1 = adam.second_moments()[0](0, 0);
  adam.step();  // no gradient this time
  EXPECT_NEAR(adam.first_moments()[0](0, 0), 0.9 * m1, 1e-15);
  EXPECT_NEAR(adam.second_moments()[0](0, 0), 0.999 * v1, 1e-15);
}

TEST(Adam, IdenticalGradientsUpdateIdentically) {
  std::mt19937_64 rng(5);
  const Matrix init = oracle::random_matrix(2, 2, rng);
  Tensor a = Tensor::parameter(init);
  Tensor b = Tensor::parameter(init);
  Adam adam_a({a});
  Adam adam_b({b});
  for (int i = 0; i < 4; ++i) {
    const Matrix g = oracle::random_matrix(2, 2, rng);
    a.grad_buffer() = g;
    b.grad_buffer() = g;
    Tape ta, tb;
    ta.backward(ops::sum(ta, ops::scale(ta, a, 0.0)));
    tb.backward(ops::sum(tb, ops::scale(tb, b, 0.0)));
    adam_a.step();
    adam_b.step();
  }
  EXPECT_EQ(a.value(), b.value());
}

TEST(Adam, GradientShapeMismatchIsInternalError) {
  Tensor p = Tensor::parameter(Matrix::Zero(2, 2));
  Adam adam({p});
  Tape tape;
  tape.backward(ops::sum(tape, p));
  p.grad_buffer() = Matrix::Zero(3, 1);
  EXPECT_THROW(adam.step(), InternalError);
}

TEST(Fit, ZeroEpochsKeepsInitialization) {
  Model model(tiny_config(), 3);
  Model reference(tiny_config(), 3);
  TrainOptions opts;
  opts.epochs = 0;
  EXPECT_TRUE(fit(model, tiny_dataset(), opts).empty());
  const auto a = model.parameters();
  const auto b = reference.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].tensor.value(), b[i].tensor.value());
}

TEST(Fit, SameSeedSameCurve) {
  const Dataset data = tiny_dataset();
  TrainOptions opts;
  opts.epochs = 4;
  opts.seed = 77;
  Model a(tiny_config(), 3);
  Model b(tiny_config(), 3);
  const auto la = fit(a, data, opts);
  const auto lb = fit(b, data, opts);
  ASSERT_EQ(la.size(), lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    EXPECT_EQ(la[i].total_loss, lb[i].total_loss);
    EXPECT_EQ(la[i].train_acc, lb[i].train_acc);
  }
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].tensor.value(), pb[i].tensor.value());
}

TEST(Fit, LossTrendsDownOverTenEpochWindows) {
  const Dataset data = tiny_dataset(4);
  TrainOptions opts;
  opts.epochs = 40;
  opts.adam.learning_rate = 2e-3;
  Model model(tiny_config(), 5);
  const auto log = fit(model, data, opts);
  std::vector<double> window_means;
  for (std::size_t w = 0; w < 4; ++w) {
    double total = 0.0;
    for (std::size_t e = 10 * w; e < 10 * (w + 1); ++e) total += log[e].total_loss;
    window_means.push_back(total / 10.0);
  }
  for (std::size_t w = 1; w < window_means.size(); ++w) {
    EXPECT_LE(window_means[w], window_means[w - 1]) << "window " << w;
  }
}

TEST(Fit, RejectsInconsistentData) {
  Model model(tiny_config(), 3);
  TrainOptions opts;
  EXPECT_THROW(fit(model, {}, opts), DataError);
  Dataset wrong_dim = tiny_dataset(1);
  wrong_dim[0].features = Matrix::Zero(wrong_dim[0].features.rows(), 5);
  EXPECT_THROW(fit(model, wrong_dim, opts), DimensionError);
  Dataset bad_label = tiny_dataset(1);
  bad_label[0].labels[3] = 3;
  EXPECT_THROW(fit(model, bad_label, opts), DataError);
}

TEST(Fit, GradientOfTotalLossMatchesFiniteDifferences) {
  ModelConfig c = tiny_config();
  c.num_blocks = 2;
  Model model(c, 8);
  const auto seq = tiny_dataset(1)[0];
  const Tensor x = Tensor::constant(seq.features.topRows(10));
  const std::vector<int> labels(seq.labels.begin(), seq.labels.begin() + 10);

  Tape tape;
  tape.backward(total_loss(tape, model.forward(tape, x), labels, c.lambda).total_tensor);
  auto loss = [&] {
    Tape t = Tape::inference();
    return total_loss(t, model.forward(t, x), labels, c.lambda).total;
  };
  for (auto& p : model.parameters()) {
    const Matrix analytic = p.tensor.grad();
    const Matrix numeric = oracle::numeric_gradient(p.tensor.mutable_value(), loss, 1e-5);
    EXPECT_LT(oracle::compare_gradients(analytic, numeric).relative, 1e-4) << p.name;
  }
}

TEST(TrainingLog, CsvHeader) {
  std::ostringstream out;
  write_training_log(out, {{1, 2.5, 2.0, 2.0, 50.0}});
  EXPECT_EQ(out.str(), "epoch,total_loss,cls_loss,smo_loss,train_acc\n1,2.5,2,2,50\n");
}

}  // namespace
}  // namespace asformer
