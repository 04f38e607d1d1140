#include "asformer/checkpoint.hpp"

#include "asformer/binary_io.hpp"
#include "asformer/errors.hpp"

#include <cmath>
#include <fstream>
#include <vector>

namespace asformer {

void write_checkpoint(std::ostream& out, const Model& model) {
  out.write(kCheckpointMagic, 4);
  binio::put<std::uint32_t>(out, kCheckpointVersion);
  const ModelConfig& c = model.config();
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.num_blocks));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.num_decoders));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.feature_dim));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.model_dim));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.num_classes));
  binio::put<double>(out, c.input_dropout);
  binio::put<double>(out, c.alpha_decay);
  binio::put<double>(out, c.lambda);
  for (const auto& p : model.parameters()) {
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.rows()));
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.cols()));
    const Matrix& v = p.tensor.value();
    for (Index i = 0; i < v.size(); ++i) binio::put<float>(out, static_cast<float>(v.data()[i]));
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path.string());
  write_checkpoint(out, model);
  if (!out) throw InternalError("failed writing checkpoint: " + path.string());
}

Model read_checkpoint(std::istream& in) {
  binio::Reader r(in);
  char magic[4];
  r.read_bytes(magic, 4, "checkpoint magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw ParseError(ParseError::Reason::kBadMagic, 0, "not a checkpoint: bad magic");
  }
  const auto version = r.get<std::uint32_t>("checkpoint version");
  if (version != kCheckpointVersion) {
    throw ParseError(ParseError::Reason::kBadVersion, 4,
                     "unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.num_blocks = static_cast<int>(r.get<std::uint32_t>("config"));
  c.num_decoders = static_cast<int>(r.get<std::uint32_t>("config"));
  c.feature_dim = static_cast<int>(r.get<std::uint32_t>("config"));
  c.model_dim = static_cast<int>(r.get<std::uint32_t>("config"));
  c.num_classes = static_cast<int>(r.get<std::uint32_t>("config"));
  c.input_dropout = r.get<double>("config");
  c.alpha_decay = r.get<double>("config");
  c.lambda = r.get<double>("config");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ParseError(ParseError::Reason::kMalformed, r.offset(),
                     std::string("checkpoint config invalid: ") + e.what());
  }

  Model model(c, 0);
  auto params = model.parameters();
  std::size_t next = 0;
  while (!r.at_end()) {
    const std::size_t at = r.offset();
    const auto name_len = r.get<std::uint32_t>("parameter name length");
    if (name_len > 4096) {
      throw ParseError(ParseError::Reason::kMalformed, at, "implausible parameter name length");
    }
    std::string name(name_len, '\0');
    r.read_bytes(name.data(), name_len, "parameter name");
    if (next >= params.size() || params[next].name != name) {
      throw ParseError(ParseError::Reason::kMalformed, at,
                       "unexpected parameter '" + name + "' for this configuration");
    }
    const auto rows = r.get<std::uint32_t>("parameter rows");
    const auto cols = r.get<std::uint32_t>("parameter cols");
    Tensor& t = params[next].tensor;
    if (rows != t.rows() || cols != t.cols()) {
      throw ParseError(ParseError::Reason::kMalformed, at,
                       "parameter '" + name + "' has shape " + shape_string(rows, cols) +
                           ", expected " + t.shape());
    }
    Matrix& v = t.mutable_value();
    for (Index i = 0; i < v.size(); ++i) {
      const std::size_t value_at = r.offset();
      const float x = r.get<float>("parameter values");
      if (!std::isfinite(x)) {
        throw ParseError(ParseError::Reason::kNonFinite, value_at,
                         "non-finite value in parameter '" + name + "'");
      }
      v.data()[i] = static_cast<double>(x);
    }
    ++next;
  }
  if (next != params.size()) {
    throw ParseError(ParseError::Reason::kTruncated, r.offset(),
                     "checkpoint holds " + std::to_string(next) + " of " +
                         std::to_string(params.size()) + " parameters");
  }
  return model;
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint not found: " + path.string());
  return read_checkpoint(in);
}

}  // namespace asformer
