#include "cegnn/named_tensors.hpp"

#include <fstream>

#include "cegnn/binary_io.hpp"
#include "cegnn/error.hpp"

namespace cegnn {

nlohmann::json tensor_manifest(const NamedTensors& tensors) {
  auto manifest = nlohmann::json::array();
  for (const auto& [name, tensor] : tensors) {
    manifest.push_back({{"name", name}, {"shape", tensor.shape()}});
  }
  return manifest;
}

void write_tensor_payload(std::ostream& out, const NamedTensors& tensors) {
  for (const auto& [name, tensor] : tensors) {
    io::write_f64(out, tensor.values());
  }
}

NamedTensors read_tensor_payload(std::istream& in, const nlohmann::json& manifest,
                                 bool requires_grad) {
  if (!manifest.is_array()) {
    throw IoError("tensor manifest is not a list");
  }
  NamedTensors tensors;
  for (const auto& entry : manifest) {
    if (!entry.contains("name") || !entry.contains("shape")) {
      throw IoError("tensor manifest entry lacks name/shape");
    }
    auto shape = entry.at("shape").get<Shape>();
    auto values = io::read_f64(in, numel(shape));
    tensors.emplace_back(entry.at("name").get<std::string>(),
                         Tensor::from(std::move(shape), std::move(values), requires_grad));
  }
  return tensors;
}

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
  auto out = io::open_for_write(path);
  io::write_header(out, {{"format", "cegnn-params"}, {"version", 1},
                         {"tensors", tensor_manifest(tensors)}});
  write_tensor_payload(out, tensors);
}

NamedTensors load_tensors(const std::filesystem::path& path) {
  auto in = io::open_for_read(path);
  const auto header = io::read_header(in);
  if (header.value("format", "") != "cegnn-params") {
    throw IoError(path.string() + " is not a parameter blob");
  }
  auto tensors = read_tensor_payload(in, header.at("tensors"), false);
  io::expect_eof(in);
  return tensors;
}

}  // namespace cegnn
