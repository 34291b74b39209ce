#pragma once

// Versioned binary container for trained models. Layout (little-endian):
//   magic "MMMLMDL\n", u32 version,
//   u32 matrix count, then per matrix:
//     u32 name length, name bytes, u64 rows, u64 cols, rows*cols f64
//     (column-major),
//   u32 string-list count, then per list:
//     u32 name length, name bytes, u64 item count, per item u32 length + bytes.

#include <filesystem>

#include "mmml/metric_learning.hpp"

namespace mmml {

inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const EmbeddingModel& model, const std::filesystem::path& file);

// Throws FormatError on bad magic, truncation, or a version newer than this
// library understands.
EmbeddingModel load_model(const std::filesystem::path& file);

}  // namespace mmml
