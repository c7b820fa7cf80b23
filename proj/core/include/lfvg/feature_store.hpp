#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lfvg/embedding_space.hpp"
#include "lfvg/tensor.hpp"

namespace lfvg {

// Feature store: a directory holding manifest.json and float32 blobs.
//
// Blob layout (little-endian): "LFVG" | u32 version = 1 | u32 rows | u32 cols
// followed by rows × cols float32 values, row-major.

inline constexpr char kBlobMagic[4] = {'L', 'F', 'V', 'G'};
inline constexpr std::uint32_t kBlobVersion = 1;
inline constexpr std::size_t kBlobHeaderBytes = 16;

void write_blob(const std::filesystem::path& path, const Matrix& m);
Matrix read_blob(const std::filesystem::path& path);

/// Writes `d` as a feature store under `dir` (created if needed).
void export_feature_store(const Dataset& d, const std::filesystem::path& dir);

/// Loads and validates a feature store. Query features keep their stored
/// values; consumers normalize them.
/// Throws LoadError naming the offending record.
Dataset import_feature_store(const std::filesystem::path& dir);

}  // namespace lfvg
