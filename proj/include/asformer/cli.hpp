#pragma once

#include "asformer/model.hpp"
#include "asformer/training.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace asformer::cli {

namespace fs = std::filesystem;

/// Everything `train` needs. Precedence: command-line flag > JSON > default.
struct RunConfig {
  ModelConfig model;
  bool feature_dim_set = false;  // otherwise taken from the data
  bool num_classes_set = false;  // otherwise taken from the class map
  int epochs = 120;
  double learning_rate = 5e-4;
  std::uint64_t seed = 0;
  fs::path manifest;
  fs::path class_map;  // defaults to mapping.txt next to the manifest
  fs::path out_dir = "out";

  static RunConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct LayerMemory {
  int block = 0;
  Index window = 0;
  std::uint64_t counted = 0;      // instrumented, from a forward pass
  std::uint64_t closed_form = 0;  // sum over frames of the clipped window size
};

struct MemoryReport {
  Index frames = 0;
  int blocks = 0;
  std::vector<LayerMemory> layers;
  std::uint64_t hierarchical_total = 0;
  std::uint64_t closed_form_total = 0;
  std::uint64_t full_total = 0;  // J * T^2
  double ratio = 0.0;            // full / hierarchical
  double epsilon = 0.0;          // 2 - total / (2^J * T)
};

/// Runs one encoder forward pass with random weights and counts the
/// attention scores it materializes, next to the closed-form count.
MemoryReport attention_memory_report(Index frames, int blocks, int model_dim = 8,
                                     std::uint64_t seed = 0);
void write_memory_report_csv(std::ostream& out, const MemoryReport& report);

/// Min-max normalizes the in-window entries of an attention row to [0, 1];
/// out-of-window entries and a constant row map to 0.
std::vector<double> minmax_normalize(const std::vector<double>& row, Index anchor, Index half);

/// Entry point shared by the executable and the tests. Returns the exit code:
/// 0 success, 1 internal, 2 config/usage, 3 dimension mismatch, 4 data mismatch.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace asformer::cli
