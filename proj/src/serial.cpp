#include "focal/serial.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace focal::serial {

namespace {

std::uint64_t to_le_bits(double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  return bits;
}

double from_le_bits(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void append_f64_le(std::string& out, std::span<const double> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * 8);
  char* dst = out.data() + start;
  for (const double v : values) {
    const std::uint64_t bits = to_le_bits(v);
    std::memcpy(dst, &bits, 8);
    dst += 8;
  }
}

std::vector<double> parse_f64_le(std::string_view bytes, std::size_t count,
                                 std::size_t byte_offset,
                                 const std::string& what) {
  if (byte_offset + count * 8 > bytes.size()) {
    throw std::runtime_error(
        what + ": truncated record, need " + std::to_string(count * 8) +
        " bytes at offset " + std::to_string(byte_offset) + " but file has " +
        std::to_string(bytes.size()));
  }
  std::vector<double> out(count);
  const char* src = bytes.data() + byte_offset;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, src + i * 8, 8);
    out[i] = from_le_bits(bits);
  }
  return out;
}

void append_matrix_row_major(std::string& out, const Eigen::MatrixXd& m) {
  std::vector<double> flat(static_cast<std::size_t>(m.size()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat[k++] = m(i, j);
  }
  append_f64_le(out, flat);
}

Eigen::MatrixXd parse_matrix_row_major(std::string_view bytes,
                                       Eigen::Index rows, Eigen::Index cols,
                                       std::size_t byte_offset,
                                       const std::string& what) {
  const std::vector<double> flat = parse_f64_le(
      bytes, static_cast<std::size_t>(rows * cols), byte_offset, what);
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = flat[k++];
  }
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string contents((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  return contents;
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::uint64_t fnv1a_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  return fnv1a_hash(read_file(path));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    // try shorter representations that still round-trip
    for (int prec = 1; prec < 17; ++prec) {
      char shorter[40];
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      std::sscanf(shorter, "%lf", &back);
      if (back == v) return shorter;
    }
  }
  return buf;
}

}  // namespace focal::serial
