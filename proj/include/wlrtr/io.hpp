#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wlrtr/error.hpp"
#include "wlrtr/tensor.hpp"

namespace wlrtr {

// HST1 layout: "HST1", rows, cols, bands (u32 LE), dtype byte (0 = f32,
// 1 = f64), then the band-sequential little-endian payload.
enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

inline constexpr std::size_t kHeaderBytes = 17;

inline std::size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 8; }

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return v;
}

inline void put_value(std::vector<unsigned char>& out, double v, DType d) {
  if (d == DType::f64) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
  } else {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
  }
}

inline double get_value(const unsigned char* p, DType d) {
  if (d == DType::f64) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    return std::bit_cast<double>(bits);
  }
  return static_cast<double>(std::bit_cast<float>(get_u32(p)));
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io_failure, "short write to " + path.string());
}

inline DType parse_dtype(unsigned v) {
  if (v > 1) throw Error(ErrorCode::bad_dtype, "dtype byte " + std::to_string(v) + " (expected 0 or 1)");
  return static_cast<DType>(v);
}

// Element count, or dim_overflow when the payload size is not representable.
inline std::size_t checked_count(std::uint64_t r, std::uint64_t c, std::uint64_t b, DType d) {
  if (r == 0 || c == 0 || b == 0) throw Error(ErrorCode::invalid_argument, "tensor dimensions must be positive");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / dtype_size(d);
  if (r > limit / c || r * c > limit / b) throw Error(ErrorCode::dim_overflow, "payload size overflows");
  const std::uint64_t n = r * c * b;
  if (n > std::numeric_limits<std::size_t>::max() / dtype_size(d)) {
    throw Error(ErrorCode::dim_overflow, "payload size overflows");
  }
  return static_cast<std::size_t>(n);
}

inline Tensor3 decode_payload(const unsigned char* p, std::size_t available, Dims dims, DType d) {
  const std::size_t n = checked_count(dims.rows, dims.cols, dims.bands, d);
  const std::size_t need = n * dtype_size(d);
  if (available < need) {
    throw Error(ErrorCode::truncated, "payload has " + std::to_string(available) + " bytes, expected " +
                                          std::to_string(need));
  }
  if (available > need) throw Error(ErrorCode::io_failure, "trailing bytes after payload");
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = get_value(p + i * dtype_size(d), d);
  return Tensor3(dims, std::move(data));
}

}  // namespace detail

inline void save_tensor(const std::filesystem::path& path, const Tensor3& t, DType dtype = DType::f64) {
  constexpr auto max32 = std::numeric_limits<std::uint32_t>::max();
  if (t.rows() > max32 || t.cols() > max32 || t.bands() > max32) {
    throw Error(ErrorCode::dim_overflow, "dimension does not fit in 32 bits");
  }
  std::vector<unsigned char> bytes{'H', 'S', 'T', '1'};
  bytes.reserve(kHeaderBytes + t.size() * dtype_size(dtype));
  detail::put_u32(bytes, static_cast<std::uint32_t>(t.rows()));
  detail::put_u32(bytes, static_cast<std::uint32_t>(t.cols()));
  detail::put_u32(bytes, static_cast<std::uint32_t>(t.bands()));
  bytes.push_back(static_cast<unsigned char>(dtype));
  for (double v : t.data()) detail::put_value(bytes, v, dtype);
  detail::write_file(path, bytes);
}

inline Tensor3 load_tensor(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "HST1", 4) != 0) {
    throw Error(ErrorCode::bad_magic, path.string() + " is not an HST1 file");
  }
  if (bytes.size() < kHeaderBytes) throw Error(ErrorCode::truncated, "header is incomplete");
  const Dims dims{detail::get_u32(&bytes[4]), detail::get_u32(&bytes[8]), detail::get_u32(&bytes[12])};
  const DType d = detail::parse_dtype(bytes[16]);
  return detail::decode_payload(bytes.data() + kHeaderBytes, bytes.size() - kHeaderBytes, dims, d);
}

// Headerless band-sequential little-endian file of the given shape.
inline Tensor3 load_raw(const std::filesystem::path& path, Dims dims, DType dtype) {
  const auto bytes = detail::read_file(path);
  return detail::decode_payload(bytes.data(), bytes.size(), dims, dtype);
}

// Whitespace-separated numbers, one matrix row per non-empty line.
inline Matrix load_matrix_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open " + path.string());
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(ErrorCode::invalid_argument, "not a number in " + path.string() + ": '" + tok + "'");
      }
    }
    if (row.empty()) continue;
    if (rows > 0 && row.size() != cols) {
      throw Error(ErrorCode::shape_mismatch, path.string() + ": row " + std::to_string(rows + 1) + " has " +
                                                 std::to_string(row.size()) + " entries, expected " +
                                                 std::to_string(cols));
    }
    cols = row.size();
    ++rows;
    values.insert(values.end(), row.begin(), row.end());
  }
  if (rows == 0) throw Error(ErrorCode::invalid_argument, path.string() + " holds no matrix");
  return Matrix(rows, cols, std::move(values));
}

inline void save_matrix_text(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
  out.precision(17);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
    out << '\n';
  }
}

// One binary PGM per band (band_000.pgm, ...), values clamped to [0, 255] and rounded.
inline std::vector<std::filesystem::path> export_band_images(const Tensor3& t, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_failure, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> files;
  for (std::size_t k = 0; k < t.bands(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "band_%03zu.pgm", k);
    const std::string header = "P5\n" + std::to_string(t.cols()) + " " + std::to_string(t.rows()) + "\n255\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    for (double v : t.band(k)) {
      const double c = std::isnan(v) ? 0.0 : std::clamp(std::round(v), 0.0, 255.0);
      bytes.push_back(static_cast<unsigned char>(c));
    }
    files.push_back(dir / name);
    detail::write_file(files.back(), bytes);
  }
  return files;
}

// key=value lines; '#' starts a comment, blank lines are ignored.
inline std::vector<std::pair<std::string, std::string>> load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open " + path.string());
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      throw Error(ErrorCode::invalid_argument, path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

}  // namespace wlrtr
