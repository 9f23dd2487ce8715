#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace focal::serial {

// Little-endian 64-bit float blobs (byte-swapped on big-endian hosts).
void append_f64_le(std::string& out, std::span<const double> values);
std::vector<double> parse_f64_le(std::string_view bytes, std::size_t count,
                                 std::size_t byte_offset,
                                 const std::string& what);

void append_matrix_row_major(std::string& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd parse_matrix_row_major(std::string_view bytes,
                                       Eigen::Index rows, Eigen::Index cols,
                                       std::size_t byte_offset,
                                       const std::string& what);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// FNV-1a content hash, used for dataset fingerprints in run manifests.
std::uint64_t fnv1a_hash(std::string_view bytes);
std::uint64_t fnv1a_file(const std::filesystem::path& path);

// Shortest decimal form that round-trips a double (printf %.17g trimmed).
std::string format_double(double v);

}  // namespace focal::serial
