#pragma once

#include "asformer/model.hpp"

#include <filesystem>
#include <iosfwd>

namespace asformer {

inline constexpr char kCheckpointMagic[4] = {'A', 'S', 'F', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian): magic, version u32, config (num_blocks,
// num_decoders, feature_dim, model_dim, num_classes as u32; input_dropout,
// alpha_decay, lambda as f64), then per parameter: name length u32, name
// bytes, rows u32, cols u32, rows*cols f32 row-major. Parameters run to EOF.
void write_checkpoint(std::ostream& out, const Model& model);
void save_checkpoint(const std::filesystem::path& path, const Model& model);

Model read_checkpoint(std::istream& in);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace asformer
