#include "focal/checkpoint.hpp"

#include <nlohmann/json.hpp>
#include <stdexcept>

#include "focal/serial.hpp"

namespace focal::nn {

namespace {
constexpr const char* kMagic = "FOCAL-CKPT-1";
using nlohmann::json;
}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const Mlp* const> networks) {
  json manifest;
  manifest["networks"] = json::array();
  for (const Mlp* net : networks) {
    manifest["networks"].push_back({
        {"name", net->name},
        {"widths", net->widths},
        {"hidden", to_string(net->hidden)},
        {"output", to_string(net->output)},
    });
  }
  std::string out = std::string(kMagic) + "\n" + manifest.dump() + "\n";
  for (const Mlp* net : networks) {
    for (const auto& layer : net->layers) {
      serial::append_matrix_row_major(out, layer.weight.value);
      serial::append_matrix_row_major(out, layer.bias.value);
    }
  }
  serial::write_file(path, out);
}

std::vector<Mlp> load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = serial::read_file(path);
  const std::size_t magic_end = bytes.find('\n');
  if (magic_end == std::string::npos ||
      bytes.substr(0, magic_end) != kMagic) {
    throw std::runtime_error("checkpoint " + path.string() +
                             ": bad magic at offset 0");
  }
  const std::size_t manifest_end = bytes.find('\n', magic_end + 1);
  if (manifest_end == std::string::npos) {
    throw std::runtime_error("checkpoint " + path.string() +
                             ": missing manifest line at offset " +
                             std::to_string(magic_end + 1));
  }
  json manifest;
  try {
    manifest = json::parse(
        bytes.substr(magic_end + 1, manifest_end - magic_end - 1));
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint " + path.string() +
                             ": manifest parse error: " + e.what());
  }

  std::vector<Mlp> nets;
  std::size_t offset = manifest_end + 1;
  // Dummy rng never used: all parameters are overwritten from the file.
  Rng rng(0);
  for (const auto& entry : manifest.at("networks")) {
    Mlp net = make_mlp(entry.at("name").get<std::string>(),
                       entry.at("widths").get<std::vector<int>>(),
                       output_transform_from_string(
                           entry.at("output").get<std::string>()),
                       rng,
                       activation_from_string(
                           entry.at("hidden").get<std::string>()));
    for (auto& layer : net.layers) {
      layer.weight.value = serial::parse_matrix_row_major(
          bytes, layer.weight.value.rows(), layer.weight.value.cols(), offset,
          "checkpoint " + path.string() + " field " + layer.weight.name);
      offset += static_cast<std::size_t>(layer.weight.value.size()) * 8;
      layer.bias.value = serial::parse_matrix_row_major(
          bytes, layer.bias.value.rows(), layer.bias.value.cols(), offset,
          "checkpoint " + path.string() + " field " + layer.bias.name);
      offset += static_cast<std::size_t>(layer.bias.value.size()) * 8;
    }
    nets.push_back(std::move(net));
  }
  if (offset != bytes.size()) {
    throw std::runtime_error("checkpoint " + path.string() + ": " +
                             std::to_string(bytes.size() - offset) +
                             " trailing bytes at offset " +
                             std::to_string(offset));
  }
  return nets;
}

const Mlp& find_network(const std::vector<Mlp>& nets, const std::string& name) {
  for (const Mlp& n : nets) {
    if (n.name == name) return n;
  }
  throw std::runtime_error("checkpoint has no network named " + name);
}

}  // namespace focal::nn
