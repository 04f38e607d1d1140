#include "asformer/checkpoint.hpp"
#include "asformer/data_io.hpp"
#include "asformer/errors.hpp"
#include "asformer/metrics.hpp"
#include "asformer/synthetic.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace asformer {
namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("asformer_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
  }

  fs::path dir_;
};

Matrix float_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix m = oracle::random_matrix(rows, cols, rng);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(m.data()[i]);
  return m;
}

std::string feature_bytes(const Matrix& m) {
  std::ostringstream out;
  write_features(out, m);
  return out.str();
}

ParseError::Reason parse_failure(const std::string& bytes) {
  std::istringstream in(bytes);
  try {
    read_features(in);
  } catch (const ParseError& e) {
    return e.reason();
  }
  ADD_FAILURE() << "expected a parse error";
  return ParseError::Reason::kMalformed;
}

TEST_F(TempDir, FeatureRoundTripIsBitExact) {
  const Matrix m = float_matrix(10, 8, 1);
  write_features(dir_ / "a.asff", m);
  const Matrix back = load_features(dir_ / "a.asff");
  EXPECT_EQ(back, m);
  EXPECT_EQ(feature_bytes(back), feature_bytes(m));
  EXPECT_EQ(fs::file_size(dir_ / "a.asff"), 16u + 10u * 8u * 4u);
}

TEST(Features, HeaderLayout) {
  const std::string bytes = feature_bytes(Matrix::Zero(3, 2));
  EXPECT_EQ(bytes.substr(0, 4), "ASFF");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 2u);
}

TEST(Features, BadMagic) {
  std::string bytes = feature_bytes(Matrix::Zero(2, 2));
  bytes.replace(0, 4, "XXXX");
  EXPECT_EQ(parse_failure(bytes), ParseError::Reason::kBadMagic);
}

TEST(Features, TruncatedAfterHeaderNamesByteCounts) {
  const std::string bytes = feature_bytes(float_matrix(4, 3, 2)).substr(0, 16);
  std::istringstream in(bytes);
  try {
    read_features(in);
    FAIL() << "expected truncation";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.reason(), ParseError::Reason::kTruncated);
    EXPECT_EQ(e.offset(), 16u);
    EXPECT_NE(std::string(e.what()).find("expected 48 bytes, got 0"), std::string::npos) << e.what();
  }
}

TEST(Features, NonFiniteValueReportsOffset) {
  std::string bytes = feature_bytes(Matrix::Zero(2, 2));
  const float nan = std::nanf("");
  std::memcpy(bytes.data() + 16 + 3 * 4, &nan, 4);
  std::istringstream in(bytes);
  try {
    read_features(in);
    FAIL() << "expected non-finite error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.reason(), ParseError::Reason::kNonFinite);
    EXPECT_EQ(e.offset(), 28u);
  }
}

TEST(Features, BadVersion) {
  std::string bytes = feature_bytes(Matrix::Zero(2, 2));
  bytes[4] = 9;
  EXPECT_EQ(parse_failure(bytes), ParseError::Reason::kBadVersion);
}

TEST(Features, FromText) {
  std::istringstream text("1 2 3\n4 5 6\n");
  const Matrix m = features_from_text(text);
  ASSERT_EQ(m.rows(), 2);
  ASSERT_EQ(m.cols(), 3);
  EXPECT_EQ(m(1, 2), 6.0);
  std::istringstream ragged("1 2\n3\n");
  EXPECT_THROW(features_from_text(ragged), DataError);
}

TEST(Labels, MapsNamesToIndices) {
  const ClassMap classes({"walk", "run"});
  std::istringstream in("walk\nwalk\nrun\n");
  EXPECT_EQ(parse_labels(in, classes, 3), (std::vector<int>{0, 0, 1}));
}

TEST(Labels, UnknownNameNamesLine) {
  const ClassMap classes({"walk", "run"});
  std::istringstream in("walk\nrun\nfly\n");
  try {
    parse_labels(in, classes);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Labels, LengthMismatch) {
  const ClassMap classes({"walk", "run"});
  std::istringstream in("walk\nrun\n");
  EXPECT_THROW(parse_labels(in, classes, 3), DataError);
}

TEST_F(TempDir, LabelAndClassMapRoundTrip) {
  const ClassMap classes({"cut", "pour", "stir"});
  classes.save(dir_ / "mapping.txt");
  const ClassMap back = ClassMap::load(dir_ / "mapping.txt");
  EXPECT_EQ(back.size(), 3);
  EXPECT_EQ(back.name(2), "stir");
  const std::vector<int> labels = {2, 2, 0, 1};
  write_labels(dir_ / "l.txt", labels, back);
  EXPECT_EQ(load_labels(dir_ / "l.txt", back, 4), labels);
}

TEST(ClassMapFormat, RejectsOutOfOrderAndDuplicates) {
  std::istringstream skip("0 a\n2 b\n");
  EXPECT_THROW(ClassMap::parse(skip), DataError);
  EXPECT_THROW(ClassMap({"a", "a"}), DataError);
  EXPECT_THROW(ClassMap({"a", ""}), DataError);
}

TEST_F(TempDir, ManifestResolvesRelativePaths) {
  fs::create_directories(dir_ / "sub");
  write_text(dir_ / "sub" / "manifest.json",
             R"([{"features": "f/a.asff", "labels": "l/a.txt"}])");
  const auto entries = load_manifest(dir_ / "sub" / "manifest.json");
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].features, dir_ / "sub" / "f/a.asff");
  EXPECT_EQ(entries[0].video(), "a");
  write_manifest(dir_ / "sub" / "copy.json", entries);
  EXPECT_EQ(load_manifest(dir_ / "sub" / "copy.json")[0].labels, entries[0].labels);
}

TEST_F(TempDir, MissingManifestIsConfigError) {
  try {
    load_manifest(dir_ / "nope.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("manifest not found"), std::string::npos);
  }
}

TEST(Checkpoint, RoundTripPreservesOutputs) {
  ModelConfig c;
  c.num_blocks = 2;
  c.num_decoders = 2;
  c.feature_dim = 5;
  c.model_dim = 6;
  c.num_classes = 3;
  Model model(c, 4);
  // Round to f32 first so the stored values are exact.
  for (auto& p : model.parameters()) {
    for (Index i = 0; i < p.tensor.size(); ++i) {
      p.tensor.mutable_value().data()[i] = static_cast<float>(p.tensor.value().data()[i]);
    }
  }
  std::stringstream buf;
  write_checkpoint(buf, model);
  const Model back = read_checkpoint(buf);
  EXPECT_EQ(back.config(), c);
  const auto a = model.parameters();
  const auto b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].tensor.value(), b[i].tensor.value());
  }
}

TEST(Checkpoint, RejectsCorruption) {
  ModelConfig c;
  c.num_blocks = 1;
  c.num_decoders = 0;
  c.feature_dim = 2;
  c.model_dim = 2;
  c.num_classes = 2;
  std::stringstream buf;
  write_checkpoint(buf, Model(c, 1));
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 4), "ASFM");
  std::istringstream bad_magic("XXXX" + bytes.substr(4));
  EXPECT_THROW(read_checkpoint(bad_magic), ParseError);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_checkpoint(truncated), ParseError);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), ConfigError);
}

TEST(Synthetic, SameSeedSameData) {
  const SyntheticSpec spec = SyntheticSpec::tuned(4, 8, 3);
  const Dataset a = generate_synthetic(spec, 3, 50, 90);
  const Dataset b = generate_synthetic(spec, 3, 50, 90);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].features, b[i].features);
    EXPECT_EQ(a[i].labels, b[i].labels);
    EXPECT_GE(a[i].features.rows(), 50);
    EXPECT_LE(a[i].features.rows(), 90);
  }
  const Dataset held_out = generate_synthetic(spec, 3, 50, 90, 1);
  EXPECT_NE(held_out[0].labels, a[0].labels);
}

TEST(Synthetic, LabelsAreValidAndAdjacentSegmentsDiffer) {
  SyntheticSpec spec = SyntheticSpec::tuned(5, 4, 8);
  spec.min_len = 1;
  spec.max_len = 4;
  for (const auto& seq : generate_synthetic(spec, 20, 10, 60)) {
    EXPECT_EQ(static_cast<Index>(seq.labels.size()), seq.features.rows());
    for (int l : seq.labels) {
      EXPECT_GE(l, 0);
      EXPECT_LT(l, 5);
    }
    const auto segs = metrics::extract_segments(seq.labels);
    for (std::size_t s = 1; s < segs.size(); ++s) {
      EXPECT_LE(segs[s].end - segs[s].start, 4u);
    }
  }
}

TEST(Synthetic, ZeroNoiseIsSeparableByNearestCentroid) {
  SyntheticSpec spec = SyntheticSpec::tuned(5, 16, 4);
  spec.noise_sigma = 0.0;
  const Matrix means = class_means(spec);
  std::size_t correct = 0, total = 0;
  for (const auto& seq : generate_synthetic(spec, 5, 100, 100)) {
    for (Index t = 0; t < seq.features.rows(); ++t) {
      Index best = 0;
      (means.rowwise() - seq.features.row(t)).rowwise().squaredNorm().minCoeff(&best);
      correct += best == seq.labels[static_cast<std::size_t>(t)] ? 1 : 0;
      EXPECT_EQ(seq.features.row(t), means.row(seq.labels[static_cast<std::size_t>(t)]));
      ++total;
    }
  }
  EXPECT_EQ(correct, total);
}

// Upper 5% point of chi-square with k degrees of freedom (Wilson-Hilferty).
double chi_square_critical_95(double k) {
  const double z = 1.6448536269514722;
  const double a = 2.0 / (9.0 * k);
  return k * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

TEST(Synthetic, TransitionFrequenciesMatchTheMatrix) {
  SyntheticSpec spec = SyntheticSpec::tuned(4, 4, 5);
  spec.min_len = 1;
  spec.max_len = 3;
  Matrix counts = Matrix::Zero(4, 4);
  double transitions = 0;
  for (const auto& seq : generate_synthetic(spec, 200, 200, 200)) {
    const auto segs = metrics::extract_segments(seq.labels);
    for (std::size_t s = 1; s < segs.size(); ++s) {
      counts(segs[s - 1].label, segs[s].label) += 1.0;
      transitions += 1.0;
    }
  }
  ASSERT_GE(transitions, 1e4);
  double chi2 = 0.0;
  int dof = 0;
  for (Index r = 0; r < 4; ++r) {
    const double n = counts.row(r).sum();
    ASSERT_GT(n, 0.0);
    for (Index c = 0; c < 4; ++c) {
      const double p = spec.transition(r, c);
      EXPECT_NEAR(counts(r, c) / n, p, 0.05) << r << "->" << c;
      if (p > 0.0) {
        chi2 += (counts(r, c) - n * p) * (counts(r, c) - n * p) / (n * p);
        ++dof;
      } else {
        EXPECT_EQ(counts(r, c), 0.0);
      }
    }
    --dof;
  }
  EXPECT_LT(chi2, chi_square_critical_95(dof));
}

TEST(Synthetic, TunedNoiseGivesAboutNinetyPercent) {
  const SyntheticSpec spec = SyntheticSpec::tuned(5, 32, 0);
  const double acc = nearest_mean_accuracy(class_means(spec), spec.noise_sigma, 4000, 99);
  EXPECT_NEAR(acc, 0.9, 0.02);
}

TEST(Synthetic, InvalidTransitionIsConfigError) {
  SyntheticSpec spec = SyntheticSpec::tuned(3, 4, 1);
  spec.transition(0, 0) = 0.5;
  spec.transition(0, 1) = 0.25;
  spec.transition(0, 2) = 0.25;
  EXPECT_THROW(generate_synthetic(spec, 1, 10, 10), ConfigError);
  spec = SyntheticSpec::tuned(3, 4, 1);
  spec.transition(1, 0) = 0.9;
  EXPECT_THROW(spec.validate(), ConfigError);
}

}  // namespace
}  // namespace asformer
