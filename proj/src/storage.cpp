#include "roadmap/storage.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <system_error>
#include <vector>

namespace roadmap {
namespace {

constexpr std::array<char, 4> kMagic = {'R', 'D', 'M', 'P'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kHeaderBytes = 16;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error(path + ": " + what);
}

std::string fmt_double(double v) {
  std::array<char, 32> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& path, std::size_t line,
                    std::string_view field) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    fail(path, "line " + std::to_string(line) + ": bad number '" +
                   std::string(field) + "'");
  }
  return v;
}

int parse_label(const std::string& path, std::size_t line,
                std::string_view field) {
  int v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    fail(path, "line " + std::to_string(line) + ": bad label '" +
                   std::string(field) + "'");
  }
  return v;
}

std::vector<std::string_view> split_fields(std::string_view row) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = row.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(row.substr(start));
      return out;
    }
    out.push_back(row.substr(start, comma - start));
    start = comma + 1;
  }
}

void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f64_le(std::string& out, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  for (int shift = 0; shift < 64; shift += 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

double get_f64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return std::bit_cast<double>(v);
}

}  // namespace

void write_dataset_csv(const std::string& path, const Dataset& ds) {
  ds.features.validate();
  if (ds.labels.size() != ds.features.rows) {
    throw std::invalid_argument("label count does not match feature rows");
  }
  std::ostringstream out;
  out << "label";
  for (std::size_t d = 0; d < ds.features.dim; ++d) out << ",f" << d;
  out << '\n';
  for (std::size_t i = 0; i < ds.features.rows; ++i) {
    out << ds.labels[i];
    auto row = ds.features.row(i);
    for (double v : row) out << ',' << fmt_double(v);
    out << '\n';
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(path, "cannot open for writing");
  const std::string s = out.str();
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) fail(path, "write failed");
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open");
  std::string line;
  if (!std::getline(f, line)) fail(path, "empty file, expected a header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto header = split_fields(line);
  if (header.empty() || header[0] != "label") {
    fail(path, "line 1: header must start with 'label'");
  }
  const std::size_t dim = header.size() - 1;
  if (dim == 0) fail(path, "line 1: header has no feature columns");
  for (std::size_t d = 0; d < dim; ++d) {
    const std::string want = "f" + std::to_string(d);
    if (header[d + 1] != want) {
      fail(path, "line 1: column " + std::to_string(d + 1) + " is '" +
                     std::string(header[d + 1]) + "', expected '" + want +
                     "'");
    }
  }

  Dataset ds;
  ds.features.dim = dim;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != dim + 1) {
      fail(path, "line " + std::to_string(line_no) + ": expected " +
                     std::to_string(dim + 1) + " fields, got " +
                     std::to_string(fields.size()));
    }
    ds.labels.push_back(parse_label(path, line_no, fields[0]));
    for (std::size_t d = 0; d < dim; ++d) {
      ds.features.data.push_back(parse_double(path, line_no, fields[d + 1]));
    }
  }
  ds.features.rows = ds.labels.size();
  if (ds.features.rows == 0) fail(path, "no data rows");
  ds.features.validate();
  return ds;
}

void save_checkpoint(const std::string& path, const EmbeddingMatrix& m) {
  m.validate();
  if (m.rows > std::numeric_limits<std::uint32_t>::max() ||
      m.dim > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("matrix too large for checkpoint format");
  }
  std::string out;
  out.reserve(kHeaderBytes + m.data.size() * sizeof(double));
  out.append(kMagic.data(), kMagic.size());
  put_u32_le(out, kFormatVersion);
  put_u32_le(out, static_cast<std::uint32_t>(m.rows));
  put_u32_le(out, static_cast<std::uint32_t>(m.dim));
  for (double v : m.data) put_f64_le(out, v);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(path, "cannot open for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) fail(path, "write failed");
}

EmbeddingMatrix load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open");
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderBytes) {
    fail(path, "truncated header: " + std::to_string(bytes.size()) +
                   " bytes, need " + std::to_string(kHeaderBytes));
  }
  const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (std::memcmp(p, kMagic.data(), kMagic.size()) != 0) {
    fail(path, "bad magic at byte offset 0, not a checkpoint file");
  }
  const std::uint32_t version = get_u32_le(p + 4);
  if (version != kFormatVersion) {
    fail(path, "unsupported format version " + std::to_string(version) +
                   " at byte offset 4 (expected " +
                   std::to_string(kFormatVersion) + ")");
  }
  EmbeddingMatrix m;
  m.rows = get_u32_le(p + 8);
  m.dim = get_u32_le(p + 12);
  const std::size_t want = kHeaderBytes + m.rows * m.dim * sizeof(double);
  if (bytes.size() != want) {
    fail(path, "payload size mismatch at byte offset " +
                   std::to_string(kHeaderBytes) + ": header promises " +
                   std::to_string(want) + " bytes total, file has " +
                   std::to_string(bytes.size()));
  }
  m.data.resize(m.rows * m.dim);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    m.data[i] = get_f64_le(p + kHeaderBytes + i * sizeof(double));
  }
  m.validate();
  return m;
}

void write_history_jsonl(const std::string& path, const TrainHistory& h) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(path, "cannot open for writing");
  for (const EpochRecord& rec : h) {
    f << nlohmann::json(rec).dump() << '\n';
  }
  if (!f) fail(path, "write failed");
}

}  // namespace roadmap
