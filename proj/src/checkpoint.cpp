#include "uinvase/checkpoint.hpp"

#include <fstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "uinvase/errors.hpp"

namespace uinvase::nn {

using nlohmann::json;

json network_to_json(const DenseNetwork& net) {
  json layers = json::array();
  for (const auto& layer : net.layers()) {
    std::vector<double> weight;
    weight.reserve(static_cast<std::size_t>(layer.weight.size()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        weight.push_back(layer.weight(r, c));
      }
    }
    std::vector<double> bias(layer.bias.data(),
                             layer.bias.data() + layer.bias.size());
    layers.push_back({{"in", layer.in_dim()},
                      {"out", layer.out_dim()},
                      {"activation", std::string(to_string(layer.activation))},
                      {"weight", std::move(weight)},
                      {"bias", std::move(bias)}});
  }
  return {{"format", std::string(kNetworkFormat)}, {"layers", std::move(layers)}};
}

DenseNetwork network_from_json(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kNetworkFormat) {
      throw ConfigError(fmt::format("unsupported network format '{}'",
                                    doc.at("format").get<std::string>()));
    }
    std::vector<DenseLayer> layers;
    for (const auto& entry : doc.at("layers")) {
      const auto in = entry.at("in").get<Eigen::Index>();
      const auto out = entry.at("out").get<Eigen::Index>();
      const auto weight = entry.at("weight").get<std::vector<double>>();
      const auto bias = entry.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(weight.size()) != in * out ||
          static_cast<Eigen::Index>(bias.size()) != out) {
        throw ConfigError("network layer has inconsistent parameter counts");
      }
      DenseLayer layer;
      layer.weight.resize(out, in);
      for (Eigen::Index r = 0; r < out; ++r) {
        for (Eigen::Index c = 0; c < in; ++c) {
          layer.weight(r, c) = weight[static_cast<std::size_t>(r * in + c)];
        }
      }
      layer.bias = Eigen::Map<const Vector>(bias.data(), out);
      layer.activation =
          activation_from_string(entry.at("activation").get<std::string>());
      layers.push_back(std::move(layer));
    }
    return DenseNetwork(std::move(layers));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed network document: {}", e.what()));
  }
}

void write_json_file(const json& doc, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << doc.dump(1) << '\n';
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(fmt::format("cannot open {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void save_network(const DenseNetwork& net, const std::filesystem::path& path) {
  write_json_file(network_to_json(net), path);
}

DenseNetwork load_network(const std::filesystem::path& path) {
  return network_from_json(read_json_file(path));
}

}  // namespace uinvase::nn
