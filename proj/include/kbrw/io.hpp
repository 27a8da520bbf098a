#pragma once

// Deterministic text and binary emitters. CSV files start with a schema line
// and write doubles with 17 significant digits and LF endings, so identical
// inputs give identical bytes.

#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "kbrw/branching.hpp"
#include "kbrw/group.hpp"
#include "kbrw/stats.hpp"

namespace kbrw {

inline constexpr const char* kCsvHeader = "# kinetic-brw v1 schema=1";

/// Round-trippable decimal form of a double ("%.17g"; nan and inf spelled out).
std::string format_double(double v);

/// Joins fields with commas and terminates with '\n'.
std::string csv_row(std::span<const std::string> fields);

class CsvWriter {
 public:
  /// Opens `path` for writing and emits the schema line and the column names.
  CsvWriter(const std::filesystem::path& path, std::span<const std::string> columns);
  /// Throws InvalidArgument when the field count differs from the column count.
  void row(std::span<const std::string> fields);
  void row(std::initializer_list<std::string> fields) { row(std::span<const std::string>(fields.begin(), fields.size())); }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

/// "0x" followed by 16 hex digits of rotation_hash.
std::string hash_string(const Orthogonal3& o);

/// Nine entries, row-major, joined with ';'.
std::string rotation_string(const Orthogonal3& o);

/// Flat little-endian records: u64 index, f64 L, 9 f64 U (row-major). Slices
/// without rotations are written with identity matrices. The reader infers n
/// from the record count, which must be a power of two.
void write_slice(const std::filesystem::path& path, const GenerationSlice& slice);
GenerationSlice read_slice(const std::filesystem::path& path);

}  // namespace kbrw
