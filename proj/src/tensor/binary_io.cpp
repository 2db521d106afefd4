#include "cegnn/binary_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cegnn/error.hpp"

namespace cegnn::io {

namespace {

std::uint64_t to_little(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    return __builtin_bswap64(bits);
  }
  return bits;
}

}  // namespace

void write_header(std::ostream& out, const nlohmann::json& manifest) {
  out << manifest.dump() << '\n' << kHeaderSentinel << '\n';
  if (!out) {
    throw IoError("failed to write header");
  }
}

nlohmann::json read_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError("missing header line");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("corrupt header: ") + e.what());
  }
  std::string sentinel;
  if (!std::getline(in, sentinel) || sentinel != kHeaderSentinel) {
    throw IoError("header sentinel missing");
  }
  return manifest;
}

void write_f64(std::ostream& out, std::span<const double> values) {
  std::vector<char> buffer(values.size() * sizeof(double));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(buffer.data() + i * sizeof(double), &bits, sizeof(bits));
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) {
    throw IoError("failed to write payload");
  }
}

std::vector<double> read_f64(std::istream& in, std::size_t count) {
  std::vector<char> buffer(count * sizeof(double));
  in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (static_cast<std::size_t>(in.gcount()) != buffer.size()) {
    throw IoError("length mismatch: payload holds " + std::to_string(in.gcount() / 8) +
                  " values, manifest expects " + std::to_string(count));
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, buffer.data() + i * sizeof(double), sizeof(bits));
    values[i] = std::bit_cast<double>(to_little(bits));
  }
  return values;
}

void write_u64(std::ostream& out, std::span<const std::size_t> values) {
  std::vector<char> buffer(values.size() * sizeof(std::uint64_t));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t bits = to_little(static_cast<std::uint64_t>(values[i]));
    std::memcpy(buffer.data() + i * sizeof(bits), &bits, sizeof(bits));
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) {
    throw IoError("failed to write payload");
  }
}

std::vector<std::size_t> read_u64(std::istream& in, std::size_t count) {
  std::vector<char> buffer(count * sizeof(std::uint64_t));
  in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (static_cast<std::size_t>(in.gcount()) != buffer.size()) {
    throw IoError("length mismatch: index payload truncated");
  }
  std::vector<std::size_t> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, buffer.data() + i * sizeof(bits), sizeof(bits));
    values[i] = static_cast<std::size_t>(to_little(bits));
  }
  return values;
}

void expect_eof(std::istream& in) {
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError("length mismatch: trailing bytes after payload");
  }
}

std::size_t remaining_bytes(std::istream& in) {
  const auto here = in.tellg();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  return static_cast<std::size_t>(end - here);
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open for writing: " + path.string());
  }
  return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open for reading: " + path.string());
  }
  return in;
}

nlohmann::json peek_header(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return read_header(in);
}

}  // namespace cegnn::io
