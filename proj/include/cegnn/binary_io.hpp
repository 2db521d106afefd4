#pragma once

// Shared container layout for every artifact file:
//
//   <single-line JSON manifest>\n
//   #END-HEADER\n
//   <little-endian IEEE-754 float64 payload>
//
// Readers check the payload length against what the manifest implies.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cegnn::io {

inline constexpr const char* kHeaderSentinel = "#END-HEADER";

void write_header(std::ostream& out, const nlohmann::json& manifest);
nlohmann::json read_header(std::istream& in);

void write_f64(std::ostream& out, std::span<const double> values);
std::vector<double> read_f64(std::istream& in, std::size_t count);

void write_u64(std::ostream& out, std::span<const std::size_t> values);
std::vector<std::size_t> read_u64(std::istream& in, std::size_t count);

/// Asserts nothing follows the payload.
void expect_eof(std::istream& in);

/// Number of payload bytes remaining after the current position.
std::size_t remaining_bytes(std::istream& in);

std::ofstream open_for_write(const std::filesystem::path& path);
std::ifstream open_for_read(const std::filesystem::path& path);

/// Reads only the manifest of a file; used to dispatch by "format".
nlohmann::json peek_header(const std::filesystem::path& path);

}  // namespace cegnn::io
