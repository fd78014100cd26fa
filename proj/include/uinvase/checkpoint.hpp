#pragma once

#include <filesystem>
#include <string_view>

#include <json.hpp>

#include "uinvase/nn.hpp"

namespace uinvase::nn {

// Network document layout (JSON):
//   { "format": "uinvase.dense/1",
//     "layers": [ { "in": I, "out": O, "activation": "relu|sigmoid|identity",
//                   "weight": [O*I numbers, row-major], "bias": [O numbers] }, ... ] }
// Numbers are written with round-trip precision, so load(save(net)) == net.
inline constexpr std::string_view kNetworkFormat = "uinvase.dense/1";

nlohmann::json network_to_json(const DenseNetwork& net);
DenseNetwork network_from_json(const nlohmann::json& doc);

void save_network(const DenseNetwork& net, const std::filesystem::path& path);
DenseNetwork load_network(const std::filesystem::path& path);

// Shared helpers for JSON files written by the library.
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace uinvase::nn
