#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "matforge/network.hpp"
#include "matforge/tensor.hpp"

namespace matforge {

struct WeightEntry {
  std::string name;
  std::vector<std::int64_t> shape;
  std::string dtype = "f32";
  std::int64_t byte_offset = 0;
  std::int64_t byte_length = 0;
  std::uint64_t checksum = 0;  // FNV-1a 64 over the blob bytes
};

struct WeightManifest {
  int format_version = 1;
  std::vector<WeightEntry> entries;
};

// Named parameter tensors, e.g. "conv1.weight". Order follows the network's
// layer order.
using NamedTensors = std::vector<std::pair<std::string, TensorF>>;

NamedTensors named_parameters(const NetworkSpec& net, const NetState<float>& state);
void assign_parameters(const NetworkSpec& net, NetState<float>& state, const NamedTensors& tensors);

// Writes manifest.json plus one raw little-endian float32 blob per tensor
// into `dir`. load(save(x)) is bit-exact.
WeightManifest save_weights(const NamedTensors& tensors, const std::string& dir);
NamedTensors load_weights(const std::string& dir);  // verifies checksums

// external tensor name -> internal parameter name
using NameMap = std::map<std::string, std::string>;

struct PretrainedLoadResult {
  NetState<float> state;
  std::vector<std::string> loaded;         // internal names populated from the file
  std::vector<std::string> reinitialized;  // head tensors initialized fresh
};

// Populates every mapped (filter-stage) tensor from an external save_weights
// directory; unmapped MLP-head tensors are freshly initialized with
// `init_seed`. Missing mapped tensors or shape mismatches raise IoError /
// ConfigError naming the tensor.
PretrainedLoadResult load_pretrained(const std::string& dir, const NameMap& map, const NetworkSpec& net,
                                     std::uint64_t init_seed, const InitOptions& init = {});

}  // namespace matforge
