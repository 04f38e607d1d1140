#pragma once

#include "asformer/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace asformer {

namespace fs = std::filesystem;

inline constexpr char kFeatureMagic[4] = {'A', 'S', 'F', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;

// Feature file: "ASFF", version u32, T u32, D u32, then T*D f32, frame-major,
// all little-endian.
void write_features(std::ostream& out, const Matrix& features);
void write_features(const fs::path& path, const Matrix& features);
Matrix read_features(std::istream& in);
Matrix load_features(const fs::path& path);

/// One whitespace-separated row per frame, as shipped with most published
/// pre-extracted feature sets (transpose first if the source is D x T).
Matrix features_from_text(std::istream& in);

class ClassMap {
 public:
  ClassMap() = default;
  explicit ClassMap(std::vector<std::string> names);

  static ClassMap load(const fs::path& path);
  static ClassMap parse(std::istream& in);
  void save(const fs::path& path) const;

  int size() const noexcept { return static_cast<int>(names_.size()); }
  const std::string& name(int index) const;
  std::optional<int> find(const std::string& name) const;
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

/// One class name per line. `expected_frames`, when given, must match the
/// line count.
std::vector<int> parse_labels(std::istream& in, const ClassMap& classes,
                              std::optional<Index> expected_frames = std::nullopt);
std::vector<int> load_labels(const fs::path& path, const ClassMap& classes,
                             std::optional<Index> expected_frames = std::nullopt);
void write_labels(const fs::path& path, const std::vector<int>& labels, const ClassMap& classes);

struct ManifestEntry {
  fs::path features;
  fs::path labels;

  // Video name used for prediction and report files: the feature file stem.
  std::string video() const { return features.stem().string(); }
};

/// JSON array of {"features": path, "labels": path}; relative paths resolve
/// against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries);

struct LabeledSequence {
  std::string name;
  Matrix features;
  std::vector<int> labels;
};

using Dataset = std::vector<LabeledSequence>;

Dataset load_dataset(const fs::path& manifest, const ClassMap& classes);

}  // namespace asformer
