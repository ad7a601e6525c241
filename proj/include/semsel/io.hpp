#ifndef SEMSEL_IO_HPP
#define SEMSEL_IO_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semsel/types.hpp"

namespace semsel {

// Dataset bundle directory:
//   semantics.csv   header `class_id,<attr1>,...,<attrN>`, one row per class
//   train.bin/test.bin  `SEMSEL01` + uint32 M + uint32 D + float32 row-major
//                       payload + `\n#LABELS\n` + M newline-delimited labels
//   split.json      {"seen": [...], "unseen": [...]}
// train.csv/test.csv (`label,f1,...,fD`) are accepted when binaries are absent.
ZslBundle load_bundle(const std::filesystem::path& dir);
void save_bundle(const ZslBundle& bundle, const std::filesystem::path& dir,
                 bool binary_features = true);

// Raw matrix in the SEMSEL01 binary layout without the label section (model files).
void write_matrix_bin(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_bin(const std::filesystem::path& path);

// Shortest round-trip decimal text for a double (std::to_chars).
std::string format_double(double v);
// float32 round-trip text, used wherever disk storage is float32.
std::string format_float32(float v);

// Writes content to a temp file in the same directory, then renames.
void atomic_write(const std::filesystem::path& path, const std::string& content);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// FNV-1a over the bundle's logical content; identifies a dataset across runs.
std::string bundle_hash(const ZslBundle& bundle);

}  // namespace semsel

#endif
