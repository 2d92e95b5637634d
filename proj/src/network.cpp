#include "matforge/network.hpp"

#include <algorithm>

namespace matforge {

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Lrn: return "lrn";
    case LayerKind::FullyConnected: return "fully_connected";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Concat: return "concat";
  }
  throw ConfigError("unknown layer kind");
}

LayerKind layer_kind_from_name(const std::string& s) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "relu") return LayerKind::Relu;
  if (s == "maxpool") return LayerKind::MaxPool;
  if (s == "lrn") return LayerKind::Lrn;
  if (s == "fully_connected") return LayerKind::FullyConnected;
  if (s == "dropout") return LayerKind::Dropout;
  if (s == "softmax") return LayerKind::Softmax;
  if (s == "flatten") return LayerKind::Flatten;
  if (s == "concat") return LayerKind::Concat;
  throw ConfigError("unknown layer kind: " + s);
}

namespace {

LayerSpec conv_layer(std::string name, int stage, std::int64_t out_ch, std::int64_t k, std::int64_t stride,
                     std::int64_t pad, std::int64_t groups, int branch = 0) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.name = std::move(name);
  l.stage_index = stage;
  l.branch = branch;
  l.conv = ConvParams{out_ch, k, k, stride, pad, groups};
  return l;
}

LayerSpec simple_layer(LayerKind kind, std::string name, int stage, int branch = 0) {
  LayerSpec l;
  l.kind = kind;
  l.name = std::move(name);
  l.stage_index = stage;
  l.branch = branch;
  return l;
}

LayerSpec pool_layer(std::string name, int stage, std::int64_t size, std::int64_t stride, int branch = 0) {
  LayerSpec l = simple_layer(LayerKind::MaxPool, std::move(name), stage, branch);
  l.pool_size = size;
  l.pool_stride = stride;
  return l;
}

LayerSpec fc_layer(std::string name, std::int64_t out, int branch = 0) {
  LayerSpec l = simple_layer(LayerKind::FullyConnected, std::move(name), 0, branch);
  l.fc_out = out;
  return l;
}

LayerSpec dropout_layer(std::string name, double ratio, int branch = 0) {
  LayerSpec l = simple_layer(LayerKind::Dropout, std::move(name), 0, branch);
  l.dropout_ratio = ratio;
  return l;
}

// Five filter stages of the deep net for one tower. Names get `prefix`.
void append_deep_stages(std::vector<LayerSpec>& layers, const std::string& prefix, std::int64_t groups, int branch) {
  layers.push_back(conv_layer(prefix + "conv1", 1, 96, 11, 4, 0, 1, branch));
  layers.push_back(simple_layer(LayerKind::Relu, prefix + "relu1", 1, branch));
  layers.push_back(pool_layer(prefix + "pool1", 1, 3, 2, branch));
  layers.push_back(simple_layer(LayerKind::Lrn, prefix + "norm1", 1, branch));

  layers.push_back(conv_layer(prefix + "conv2", 2, 256, 5, 1, 2, groups, branch));
  layers.push_back(simple_layer(LayerKind::Relu, prefix + "relu2", 2, branch));
  layers.push_back(pool_layer(prefix + "pool2", 2, 3, 2, branch));
  layers.push_back(simple_layer(LayerKind::Lrn, prefix + "norm2", 2, branch));

  layers.push_back(conv_layer(prefix + "conv3", 3, 384, 3, 1, 1, 1, branch));
  layers.push_back(simple_layer(LayerKind::Relu, prefix + "relu3", 3, branch));

  layers.push_back(conv_layer(prefix + "conv4", 4, 384, 3, 1, 1, groups, branch));
  layers.push_back(simple_layer(LayerKind::Relu, prefix + "relu4", 4, branch));

  layers.push_back(conv_layer(prefix + "conv5", 5, 384, 3, 1, 1, groups, branch));
  layers.push_back(simple_layer(LayerKind::Relu, prefix + "relu5", 5, branch));
  layers.push_back(pool_layer(prefix + "pool5", 5, 3, 2, branch));
}

}  // namespace

NetworkSpec build_vanilla(std::int64_t input_size) {
  NetworkSpec net;
  net.input_channels = 3;
  net.input_size = input_size;
  net.num_classes = 10;
  net.layers.push_back(conv_layer("conv1", 1, 96, 11, 4, 0, 1));
  net.layers.push_back(simple_layer(LayerKind::Relu, "relu1", 1));
  net.layers.push_back(pool_layer("pool1", 1, 6, 6));
  net.layers.push_back(dropout_layer("drop1", 0.5));
  net.layers.push_back(simple_layer(LayerKind::Flatten, "flatten", 0));
  net.layers.push_back(fc_layer("fc2", 4096));
  net.layers.push_back(simple_layer(LayerKind::Relu, "relu2", 0));
  net.layers.push_back(fc_layer("fc3", 10));
  net.layers.push_back(simple_layer(LayerKind::Softmax, "prob", 0));
  infer_shapes(net);  // rejects too-small inputs up front
  return net;
}

NetworkSpec build_deep(std::int64_t input_channels, std::int64_t input_size, std::int64_t groups) {
  NetworkSpec net;
  net.input_channels = input_channels;
  net.input_size = input_size;
  net.num_classes = 10;
  append_deep_stages(net.layers, "", groups, 0);
  net.layers.push_back(simple_layer(LayerKind::Flatten, "flatten", 0));
  net.layers.push_back(fc_layer("fc6", 4096));
  net.layers.push_back(simple_layer(LayerKind::Relu, "relu6", 0));
  net.layers.push_back(dropout_layer("drop6", 0.5));
  net.layers.push_back(fc_layer("fc7", 4096));
  net.layers.push_back(simple_layer(LayerKind::Relu, "relu7", 0));
  net.layers.push_back(dropout_layer("drop7", 0.5));
  net.layers.push_back(fc_layer("fc8", 10));
  net.layers.push_back(simple_layer(LayerKind::Softmax, "prob", 0));
  infer_shapes(net);
  return net;
}

NetworkSpec build_branched(FusionKind fusion, std::int64_t input_size, std::int64_t groups) {
  NetworkSpec net;
  net.branched = true;
  net.input_channels = 6;  // 0..2 reflectance, 3..5 replicated shading
  net.input_size = input_size;
  net.num_classes = 10;
  for (int branch = 1; branch <= 2; ++branch) {
    const std::string prefix = branch == 1 ? "refl_" : "shad_";
    append_deep_stages(net.layers, prefix, groups, branch);
    net.layers.push_back(simple_layer(LayerKind::Flatten, prefix + "flatten", 0, branch));
    net.layers.push_back(fc_layer(prefix + "fc6", 4096, branch));
    net.layers.push_back(simple_layer(LayerKind::Relu, prefix + "relu6", 0, branch));
    net.layers.push_back(dropout_layer(prefix + "drop6", 0.5, branch));
    net.layers.push_back(fc_layer(prefix + "fc7", 4096, branch));
    net.layers.push_back(simple_layer(LayerKind::Relu, prefix + "relu7", 0, branch));
    net.layers.push_back(dropout_layer(prefix + "drop7", 0.5, branch));
  }
  LayerSpec fuse = simple_layer(LayerKind::Concat, "fuse", 0);
  fuse.fusion = fusion;
  net.layers.push_back(fuse);
  net.layers.push_back(fc_layer("fc8", 10));
  net.layers.push_back(simple_layer(LayerKind::Softmax, "prob", 0));
  infer_shapes(net);
  return net;
}

int max_stage(const NetworkSpec& net) {
  int mx = 0;
  for (const auto& l : net.layers) mx = std::max(mx, l.stage_index);
  return mx;
}

FreezeMask freeze_stages(const NetworkSpec& net, int k) {
  if (k < 0 || k > max_stage(net)) throw ConfigError("freeze_stages: k out of range");
  FreezeMask m;
  for (int s = 1; s <= k; ++s) m.frozen_stages.insert(s);
  return m;
}

std::vector<std::vector<std::int64_t>> infer_shapes(const NetworkSpec& net) {
  std::map<int, std::vector<std::int64_t>> cur;
  if (net.branched) {
    cur[1] = {1, 3, net.input_size, net.input_size};
    cur[2] = {1, net.input_channels - 3, net.input_size, net.input_size};
  } else {
    cur[0] = {1, net.input_channels, net.input_size, net.input_size};
  }
  std::vector<std::vector<std::int64_t>> out;
  out.reserve(net.layers.size());
  int softmax_count = 0;
  std::map<int, int> prev_stage;  // per branch; filter-stage indices must not decrease
  for (const LayerSpec& l : net.layers) {
    if (l.stage_index > 0) {
      int& prev = prev_stage[l.branch];
      if (l.stage_index < prev) throw ConfigError("stage_index decreases at layer: " + l.name);
      prev = l.stage_index;
    }

    if (l.kind == LayerKind::Concat) {
      auto a = cur.at(1), b = cur.at(2);
      if (a.size() != 2 || b.size() != 2) throw ConfigError("concat: expects flattened features");
      std::vector<std::int64_t> s{1, l.fusion == FusionKind::Sum ? a[1] : a[1] + b[1]};
      if (l.fusion == FusionKind::Sum && a[1] != b[1]) throw ConfigError("sum fusion: widths differ");
      cur.erase(1);
      cur.erase(2);
      cur[0] = s;
      out.push_back(s);
      continue;
    }
    auto it = cur.find(l.branch);
    if (it == cur.end()) throw ConfigError("layer on unknown branch: " + l.name);
    std::vector<std::int64_t>& s = it->second;
    switch (l.kind) {
      case LayerKind::Conv: {
        if (s.size() != 4) throw ConfigError("conv on non-spatial input: " + l.name);
        l.conv.validate(s[1]);
        if (s[2] + 2 * l.conv.pad < l.conv.kernel_h || s[3] + 2 * l.conv.pad < l.conv.kernel_w)
          throw ConfigError("conv input too small: " + l.name);
        s = {s[0], l.conv.out_channels, l.conv.out_h(s[2]), l.conv.out_w(s[3])};
        if (s[2] < 1 || s[3] < 1) throw ConfigError("conv output empty: " + l.name);
        break;
      }
      case LayerKind::MaxPool: {
        if (s.size() != 4) throw ConfigError("maxpool on non-spatial input: " + l.name);
        if (l.pool_size > s[2] || l.pool_size > s[3]) throw ConfigError("pool window exceeds input: " + l.name);
        s = {s[0], s[1], (s[2] - l.pool_size) / l.pool_stride + 1, (s[3] - l.pool_size) / l.pool_stride + 1};
        break;
      }
      case LayerKind::Flatten: {
        std::int64_t d = 1;
        for (std::size_t i = 1; i < s.size(); ++i) d *= s[i];
        s = {s[0], d};
        break;
      }
      case LayerKind::FullyConnected: {
        if (s.size() != 2) throw ConfigError("fully_connected on non-flattened input: " + l.name);
        s = {s[0], l.fc_out};
        break;
      }
      case LayerKind::Softmax: {
        ++softmax_count;
        if (s.size() != 2 || s[1] != net.num_classes)
          throw ConfigError("softmax input width != num_classes: " + l.name);
        break;
      }
      case LayerKind::Relu:
      case LayerKind::Lrn:
      case LayerKind::Dropout:
        break;
      default:
        throw ConfigError("unexpected layer kind");
    }
    out.push_back(s);
  }
  if (softmax_count != 1) throw ConfigError("network must have exactly one terminal softmax");
  if (net.layers.back().kind != LayerKind::Softmax) throw ConfigError("softmax must be the terminal layer");
  return out;
}

nlohmann::json NetworkSpec::to_json() const {
  nlohmann::json j;
  j["input_channels"] = input_channels;
  j["input_size"] = input_size;
  j["num_classes"] = num_classes;
  j["branched"] = branched;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json lj;
    lj["kind"] = layer_kind_name(l.kind);
    lj["name"] = l.name;
    lj["stage_index"] = l.stage_index;
    lj["branch"] = l.branch;
    switch (l.kind) {
      case LayerKind::Conv:
        lj["out_channels"] = l.conv.out_channels;
        lj["kernel_h"] = l.conv.kernel_h;
        lj["kernel_w"] = l.conv.kernel_w;
        lj["stride"] = l.conv.stride;
        lj["pad"] = l.conv.pad;
        lj["groups"] = l.conv.groups;
        break;
      case LayerKind::MaxPool:
        lj["size"] = l.pool_size;
        lj["stride"] = l.pool_stride;
        break;
      case LayerKind::Lrn:
        lj["n"] = l.lrn.n;
        lj["alpha"] = l.lrn.alpha;
        lj["beta"] = l.lrn.beta;
        lj["k"] = l.lrn.k;
        break;
      case LayerKind::FullyConnected:
        lj["out"] = l.fc_out;
        break;
      case LayerKind::Dropout:
        lj["ratio"] = l.dropout_ratio;
        break;
      case LayerKind::Concat:
        lj["fusion"] = l.fusion == FusionKind::Sum ? "sum" : "concat";
        break;
      default:
        break;
    }
    j["layers"].push_back(std::move(lj));
  }
  return j;
}

NetworkSpec NetworkSpec::from_json(const nlohmann::json& j) {
  NetworkSpec net;
  net.input_channels = j.at("input_channels").get<std::int64_t>();
  net.input_size = j.at("input_size").get<std::int64_t>();
  net.num_classes = j.at("num_classes").get<int>();
  net.branched = j.value("branched", false);
  for (const auto& lj : j.at("layers")) {
    LayerSpec l;
    l.kind = layer_kind_from_name(lj.at("kind").get<std::string>());
    l.name = lj.at("name").get<std::string>();
    l.stage_index = lj.at("stage_index").get<int>();
    l.branch = lj.value("branch", 0);
    switch (l.kind) {
      case LayerKind::Conv:
        l.conv.out_channels = lj.at("out_channels").get<std::int64_t>();
        l.conv.kernel_h = lj.at("kernel_h").get<std::int64_t>();
        l.conv.kernel_w = lj.at("kernel_w").get<std::int64_t>();
        l.conv.stride = lj.at("stride").get<std::int64_t>();
        l.conv.pad = lj.at("pad").get<std::int64_t>();
        l.conv.groups = lj.at("groups").get<std::int64_t>();
        break;
      case LayerKind::MaxPool:
        l.pool_size = lj.at("size").get<std::int64_t>();
        l.pool_stride = lj.at("stride").get<std::int64_t>();
        break;
      case LayerKind::Lrn:
        l.lrn.n = lj.at("n").get<std::int64_t>();
        l.lrn.alpha = lj.at("alpha").get<double>();
        l.lrn.beta = lj.at("beta").get<double>();
        l.lrn.k = lj.at("k").get<double>();
        break;
      case LayerKind::FullyConnected:
        l.fc_out = lj.at("out").get<std::int64_t>();
        break;
      case LayerKind::Dropout:
        l.dropout_ratio = lj.at("ratio").get<double>();
        break;
      case LayerKind::Concat:
        l.fusion = lj.at("fusion").get<std::string>() == "sum" ? FusionKind::Sum : FusionKind::Concat;
        break;
      default:
        break;
    }
    net.layers.push_back(std::move(l));
  }
  return net;
}

}  // namespace matforge
