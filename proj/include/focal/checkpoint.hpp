#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "focal/mlp.hpp"

namespace focal::nn {

// Single-file checkpoint: a magic line, a one-line JSON manifest (network
// names, layer widths, activation identifiers), then the flat parameter
// arrays as 64-bit little-endian floats in manifest order (per network:
// weight then bias per layer, weights row-major).
void save_checkpoint(const std::filesystem::path& path,
                     std::span<const Mlp* const> networks);

std::vector<Mlp> load_checkpoint(const std::filesystem::path& path);

// Convenience lookup; throws when the name is absent.
const Mlp& find_network(const std::vector<Mlp>& nets, const std::string& name);

}  // namespace focal::nn
