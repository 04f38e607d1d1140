#include "asformer/data_io.hpp"

#include "asformer/binary_io.hpp"
#include "asformer/errors.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace asformer {

void write_features(std::ostream& out, const Matrix& features) {
  out.write(kFeatureMagic, 4);
  binio::put<std::uint32_t>(out, kFeatureVersion);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(features.rows()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(features.cols()));
  for (Index i = 0; i < features.size(); ++i) {
    binio::put<float>(out, static_cast<float>(features.data()[i]));
  }
}

void write_features(const fs::path& path, const Matrix& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open feature file for writing: " + path.string());
  write_features(out, features);
}

Matrix read_features(std::istream& in) {
  binio::Reader r(in);
  char magic[4];
  r.read_bytes(magic, 4, "feature header");
  if (std::memcmp(magic, kFeatureMagic, 4) != 0) {
    throw ParseError(ParseError::Reason::kBadMagic, 0,
                     "bad feature file magic '" + std::string(magic, 4) + "'");
  }
  const auto version = r.get<std::uint32_t>("feature header");
  if (version != kFeatureVersion) {
    throw ParseError(ParseError::Reason::kBadVersion, 4,
                     "unsupported feature file version " + std::to_string(version));
  }
  const auto frames = r.get<std::uint32_t>("feature header");
  const auto dim = r.get<std::uint32_t>("feature header");
  if (frames == 0 || dim == 0) {
    throw ParseError(ParseError::Reason::kMalformed, 8,
                     "feature file declares empty shape " + shape_string(frames, dim));
  }
  const std::size_t count = static_cast<std::size_t>(frames) * dim;
  std::vector<float> raw(count);
  const std::size_t payload_at = r.offset();
  r.read_bytes(reinterpret_cast<char*>(raw.data()), count * sizeof(float), "feature payload");
  Matrix out(frames, dim);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(raw[i])) {
      throw ParseError(ParseError::Reason::kNonFinite, payload_at + i * sizeof(float),
                       "non-finite feature value at frame " + std::to_string(i / dim));
    }
    out.data()[i] = static_cast<double>(raw[i]);
  }
  return out;
}

Matrix load_features(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("feature file not found: " + path.string());
  try {
    return read_features(in);
  } catch (const ParseError& e) {
    throw ParseError(e.reason(), e.offset(), path.string() + ": " + e.detail());
  }
}

Matrix features_from_text(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw DataError("unparsable feature value on line " + std::to_string(line_no));
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError("line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                      " values, expected " + std::to_string(rows.front().size()));
    }
    for (double x : row) {
      if (!std::isfinite(x)) throw DataError("non-finite feature value on line " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("text feature input is empty");
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index t = 0; t < out.rows(); ++t) {
    for (Index c = 0; c < out.cols(); ++c) out(t, c) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)];
  }
  return out;
}

ClassMap::ClassMap(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw DataError("class " + std::to_string(i) + " has an empty name");
    if (!index_.emplace(names_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate class name '" + names_[i] + "'");
    }
  }
}

ClassMap ClassMap::parse(std::istream& in) {
  std::vector<std::string> names;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos) {
      throw DataError("class map line " + std::to_string(line_no) + ": expected '<index> <name>'");
    }
    int index = -1;
    try {
      std::size_t used = 0;
      index = std::stoi(line.substr(0, space), &used);
      if (used != space) index = -1;
    } catch (const std::exception&) {
      index = -1;
    }
    if (index != static_cast<int>(names.size())) {
      throw DataError("class map line " + std::to_string(line_no) + ": expected index " +
                      std::to_string(names.size()));
    }
    names.push_back(line.substr(space + 1));
  }
  if (names.empty()) throw DataError("class map is empty");
  return ClassMap(std::move(names));
}

ClassMap ClassMap::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("class map not found: " + path.string());
  return parse(in);
}

void ClassMap::save(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open class map for writing: " + path.string());
  for (std::size_t i = 0; i < names_.size(); ++i) out << i << ' ' << names_[i] << '\n';
}

const std::string& ClassMap::name(int index) const {
  if (index < 0 || index >= size()) {
    throw DataError("class index " + std::to_string(index) + " outside [0, " +
                    std::to_string(size()) + ")");
  }
  return names_[static_cast<std::size_t>(index)];
}

std::optional<int> ClassMap::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> parse_labels(std::istream& in, const ClassMap& classes,
                              std::optional<Index> expected_frames) {
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto index = classes.find(line);
    if (!index) {
      throw DataError("unknown class name '" + line + "' at line " + std::to_string(line_no));
    }
    labels.push_back(*index);
  }
  if (expected_frames && static_cast<Index>(labels.size()) != *expected_frames) {
    throw DataError("label file has " + std::to_string(labels.size()) + " lines, expected " +
                    std::to_string(*expected_frames));
  }
  return labels;
}

std::vector<int> load_labels(const fs::path& path, const ClassMap& classes,
                             std::optional<Index> expected_frames) {
  std::ifstream in(path);
  if (!in) throw ConfigError("label file not found: " + path.string());
  try {
    return parse_labels(in, classes, expected_frames);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_labels(const fs::path& path, const std::vector<int>& labels, const ClassMap& classes) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open label file for writing: " + path.string());
  for (int c : labels) out << classes.name(c) << '\n';
}

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("manifest not found: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_array()) throw DataError("manifest " + path.string() + " must be a JSON array");
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    if (!item.is_object() || !item.contains("features") || !item.contains("labels") ||
        !item["features"].is_string() || !item["labels"].is_string()) {
      throw DataError("manifest entry " + std::to_string(i) +
                      " needs string fields 'features' and 'labels'");
    }
    auto resolve = [&base](const std::string& p) {
      fs::path q(p);
      return q.is_absolute() ? q : base / q;
    };
    entries.push_back({resolve(item["features"]), resolve(item["labels"])});
  }
  return entries;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  const fs::path base = fs::absolute(path).parent_path();
  auto relative = [&base](const fs::path& p) {
    const fs::path rel = fs::absolute(p).lexically_relative(base);
    return rel.empty() ? fs::absolute(p).generic_string() : rel.generic_string();
  };
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& e : entries) {
    doc.push_back({{"features", relative(e.features)}, {"labels", relative(e.labels)}});
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open manifest for writing: " + path.string());
  out << doc.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& manifest, const ClassMap& classes) {
  Dataset data;
  for (const auto& entry : load_manifest(manifest)) {
    LabeledSequence seq;
    seq.name = entry.video();
    seq.features = load_features(entry.features);
    seq.labels = load_labels(entry.labels, classes, seq.features.rows());
    data.push_back(std::move(seq));
  }
  return data;
}

}  // namespace asformer
