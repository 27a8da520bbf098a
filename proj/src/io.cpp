#include "kbrw/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "kbrw/error.hpp"

namespace kbrw {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_row(std::span<const std::string> fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += fields[i];
  }
  line += '\n';
  return line;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::span<const std::string> columns)
    : out_(path, std::ios::binary | std::ios::trunc), columns_(columns.size()) {
  if (!out_) throw Error(ErrorCode::Config, "cannot open " + path.string() + " for writing");
  out_ << kCsvHeader << '\n' << csv_row(columns);
}

void CsvWriter::row(std::span<const std::string> fields) {
  require(fields.size() == columns_, "csv row has the wrong number of fields");
  out_ << csv_row(fields);
}

std::string hash_string(const Orthogonal3& o) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(rotation_hash(o)));
  return buf;
}

std::string rotation_string(const Orthogonal3& o) {
  std::string s;
  for (std::size_t i = 0; i < 9; ++i) {
    if (i) s += ';';
    s += format_double(o.entries()[i]);
  }
  return s;
}

namespace {

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorCode::InvalidArgument, "truncated slice file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

void write_slice(const std::filesystem::path& path, const GenerationSlice& slice) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Config, "cannot open " + path.string() + " for writing");
  const Orthogonal3 id = Orthogonal3::identity();
  for (std::size_t i = 0; i < slice.size(); ++i) {
    put_u64(out, i);
    put_u64(out, std::bit_cast<std::uint64_t>(slice.scales[i]));
    const auto& u = slice.has_rotations() ? slice.rotations[i] : id;
    for (double e : u.entries()) put_u64(out, std::bit_cast<std::uint64_t>(e));
  }
}

GenerationSlice read_slice(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Config, "cannot open " + path.string());
  const auto bytes = std::filesystem::file_size(path);
  constexpr std::uintmax_t kRecord = 11 * 8;
  if (bytes % kRecord != 0) throw Error(ErrorCode::InvalidArgument, "slice file size is not a record multiple");
  const auto count = bytes / kRecord;
  if (count == 0 || !std::has_single_bit(count)) {
    throw Error(ErrorCode::InvalidArgument, "slice record count must be a power of two");
  }
  GenerationSlice slice;
  slice.n = std::countr_zero(count);
  slice.scales.resize(count);
  slice.rotations.resize(count);
  for (std::uintmax_t k = 0; k < count; ++k) {
    const auto index = get_u64(in);
    if (index != k) throw Error(ErrorCode::InvalidArgument, "slice records out of order");
    slice.scales[k] = std::bit_cast<double>(get_u64(in));
    Orthogonal3::Entries e{};
    for (auto& x : e) x = std::bit_cast<double>(get_u64(in));
    slice.rotations[k] = Orthogonal3::from_entries(e, 1e-10);
  }
  return slice;
}

}  // namespace kbrw
