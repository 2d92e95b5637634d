#include "matforge/weights_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "matforge/util.hpp"

namespace fs = std::filesystem;

namespace matforge {

namespace {

std::string blob_filename(const std::string& name) {
  std::string s = name;
  for (char& c : s)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  return s + ".bin";
}

// Tensors serialize as little-endian IEEE-754 binary32, row-major, no header.
void write_blob(const std::string& path, const TensorF& t) {
  static_assert(sizeof(float) == 4);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write blob: " + path);
  out.write(reinterpret_cast<const char*>(t.data()), t.numel() * 4);
  if (!out) throw IoError("short write: " + path);
}

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot read blob: " + path);
  const std::streamsize n = in.tellg();
  in.seekg(0);
  std::vector<char> buf(static_cast<std::size_t>(n));
  in.read(buf.data(), n);
  if (!in) throw IoError("short read: " + path);
  return buf;
}

}  // namespace

NamedTensors named_parameters(const NetworkSpec& net, const NetState<float>& state) {
  NamedTensors out;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (state.params[i].weight.empty()) continue;
    out.emplace_back(net.layers[i].name + ".weight", state.params[i].weight);
    out.emplace_back(net.layers[i].name + ".bias", state.params[i].bias);
  }
  return out;
}

void assign_parameters(const NetworkSpec& net, NetState<float>& state, const NamedTensors& tensors) {
  std::map<std::string, const TensorF*> by_name;
  for (const auto& [name, t] : tensors) by_name[name] = &t;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!net.layers[i].has_params()) continue;
    for (const char* suffix : {".weight", ".bias"}) {
      const std::string name = net.layers[i].name + suffix;
      auto it = by_name.find(name);
      if (it == by_name.end()) throw ConfigError("assign_parameters: missing tensor " + name);
      TensorF& dst = std::strcmp(suffix, ".weight") == 0 ? state.params[i].weight : state.params[i].bias;
      if (!dst.empty() && dst.shape() != it->second->shape())
        throw ConfigError("assign_parameters: shape mismatch for " + name + ": expected " + dst.shape_str() +
                          ", got " + it->second->shape_str());
      dst = *it->second;
    }
  }
}

WeightManifest save_weights(const NamedTensors& tensors, const std::string& dir) {
  for (const auto& [name, t] : tensors)
    if (!t.all_finite()) throw ConfigError("save_weights: non-finite values in " + name);
  fs::create_directories(dir);
  WeightManifest manifest;
  for (const auto& [name, t] : tensors) {
    const std::string file = blob_filename(name);
    write_blob((fs::path(dir) / file).string(), t);
    WeightEntry e;
    e.name = name;
    e.shape = t.shape();
    e.byte_offset = 0;
    e.byte_length = t.numel() * 4;
    e.checksum = fnv1a64(t.data(), static_cast<std::size_t>(t.numel()) * 4);
    manifest.entries.push_back(std::move(e));
  }
  nlohmann::json j;
  j["format_version"] = manifest.format_version;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    j["entries"].push_back({{"name", e.name},
                            {"shape", e.shape},
                            {"dtype", e.dtype},
                            {"byte_offset", e.byte_offset},
                            {"byte_length", e.byte_length},
                            {"checksum", e.checksum}});
  }
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir);
  out << j.dump(2) << "\n";
  return manifest;
}

NamedTensors load_weights(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw IoError("cannot open weight manifest in " + dir);
  nlohmann::json j = nlohmann::json::parse(in);
  NamedTensors out;
  for (const auto& ej : j.at("entries")) {
    WeightEntry e;
    e.name = ej.at("name").get<std::string>();
    e.shape = ej.at("shape").get<std::vector<std::int64_t>>();
    e.dtype = ej.at("dtype").get<std::string>();
    e.byte_offset = ej.at("byte_offset").get<std::int64_t>();
    e.byte_length = ej.at("byte_length").get<std::int64_t>();
    e.checksum = ej.at("checksum").get<std::uint64_t>();
    if (e.dtype != "f32") throw IoError("unsupported dtype for " + e.name + ": " + e.dtype);

    auto buf = read_file((fs::path(dir) / blob_filename(e.name)).string());
    if (static_cast<std::int64_t>(buf.size()) < e.byte_offset + e.byte_length)
      throw IoError("blob too short for " + e.name);
    const char* base = buf.data() + e.byte_offset;
    if (fnv1a64(base, static_cast<std::size_t>(e.byte_length)) != e.checksum)
      throw IoError("checksum mismatch for tensor " + e.name);

    TensorF t(e.shape);
    if (t.numel() * 4 != e.byte_length) throw IoError("byte length inconsistent for " + e.name);
    std::memcpy(t.data(), base, static_cast<std::size_t>(e.byte_length));
    out.emplace_back(e.name, std::move(t));
  }
  return out;
}

PretrainedLoadResult load_pretrained(const std::string& dir, const NameMap& map, const NetworkSpec& net,
                                     std::uint64_t init_seed, const InitOptions& init) {
  NamedTensors external = load_weights(dir);
  std::map<std::string, const TensorF*> ext_by_name;
  for (const auto& [name, t] : external) ext_by_name[name] = &t;

  std::map<std::string, std::string> internal_to_external;
  for (const auto& [ext, internal] : map) {
    if (!internal_to_external.emplace(internal, ext).second)
      throw ConfigError("load_pretrained: name map not injective on target " + internal);
  }

  PretrainedLoadResult result;
  result.state = init_state<float>(net, init_seed, init);

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!net.layers[i].has_params()) continue;
    for (const char* suffix : {".weight", ".bias"}) {
      const std::string internal = net.layers[i].name + suffix;
      auto mapped = internal_to_external.find(internal);
      if (mapped == internal_to_external.end()) {
        if (net.layers[i].stage_index > 0)
          throw ConfigError("load_pretrained: filter-stage tensor " + internal + " has no mapped source");
        result.reinitialized.push_back(internal);  // fresh head
        continue;
      }
      auto ext = ext_by_name.find(mapped->second);
      if (ext == ext_by_name.end())
        throw IoError("load_pretrained: tensor " + mapped->second + " missing from " + dir);
      TensorF& dst = std::strcmp(suffix, ".weight") == 0 ? result.state.params[i].weight
                                                         : result.state.params[i].bias;
      if (ext->second->shape() != dst.shape())
        throw ConfigError("load_pretrained: shape mismatch for " + internal + ": expected " + dst.shape_str() +
                          ", got " + ext->second->shape_str());
      dst = *ext->second;
      result.loaded.push_back(internal);
    }
  }
  return result;
}

}  // namespace matforge
