#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cegnn/tensor.hpp"

namespace cegnn {

/// Tensors addressed by stable dotted names, in a fixed order.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// [{"name": ..., "shape": [...]}, ...] in storage order.
nlohmann::json tensor_manifest(const NamedTensors& tensors);

void write_tensor_payload(std::ostream& out, const NamedTensors& tensors);

/// Reads tensors listed in `manifest` from the payload at the current position.
NamedTensors read_tensor_payload(std::istream& in, const nlohmann::json& manifest,
                                 bool requires_grad);

/// Standalone parameter blob: manifest header then concatenated payload.
void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::filesystem::path& path);

}  // namespace cegnn
