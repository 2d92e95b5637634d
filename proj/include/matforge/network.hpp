#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "matforge/layers.hpp"
#include "matforge/tensor.hpp"

namespace matforge {

enum class LayerKind { Conv, Relu, MaxPool, Lrn, FullyConnected, Dropout, Softmax, Flatten, Concat };

enum class FusionKind { Concat, Sum };

std::string layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& s);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::string name;
  int stage_index = 0;  // 0 = MLP head, filter stages count from 1
  int branch = 0;       // 0 = trunk/shared; 1, 2 = tower of a branched net

  ConvParams conv;                 // Conv
  std::int64_t pool_size = 0;      // MaxPool
  std::int64_t pool_stride = 0;    // MaxPool
  LrnParams lrn;                   // Lrn
  std::int64_t fc_out = 0;         // FullyConnected
  double dropout_ratio = 0.0;      // Dropout
  FusionKind fusion = FusionKind::Concat;  // Concat

  bool has_params() const { return kind == LayerKind::Conv || kind == LayerKind::FullyConnected; }
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::int64_t input_channels = 3;
  std::int64_t input_size = 227;
  int num_classes = 10;
  bool branched = false;

  nlohmann::json to_json() const;
  static NetworkSpec from_json(const nlohmann::json& j);
};

struct FreezeMask {
  std::set<int> frozen_stages;  // may include 0 to freeze the MLP head by hand
  bool frozen(int stage) const { return frozen_stages.count(stage) > 0; }
};

NetworkSpec build_vanilla(std::int64_t input_size = 227);
NetworkSpec build_deep(std::int64_t input_channels = 3, std::int64_t input_size = 227, std::int64_t groups = 2);
NetworkSpec build_branched(FusionKind fusion = FusionKind::Concat, std::int64_t input_size = 227,
                           std::int64_t groups = 2);

// frozen_stages = {1..k}; the MLP head (stage 0) is never frozen.
FreezeMask freeze_stages(const NetworkSpec& net, int k);

int max_stage(const NetworkSpec& net);

// Output shape per layer for batch size 1; throws ConfigError when shapes do
// not compose. Activations are (1,C,H,W); flattened features are (1,D).
std::vector<std::vector<std::int64_t>> infer_shapes(const NetworkSpec& net);

// ---- runtime ----

template <typename T>
struct ParamState {
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
struct NetState {
  std::vector<ParamState<T>> params;  // aligned with NetworkSpec::layers; empty tensors for parameterless layers
};

struct InitOptions {
  double conv_std = 0.01;
  double fc_std = 0.005;
  bool bias_one = false;  // bias 1 on conv1/conv3 and FC layers (reference-model convention)
};

template <typename T>
NetState<T> init_state(const NetworkSpec& net, std::uint64_t seed, const InitOptions& opt = {});

template <typename T>
struct ForwardCache {
  std::vector<Tensor<T>> inputs;                   // per layer, the activation it consumed
  std::vector<Tensor<T>> inputs_b;                 // second input (Concat only)
  std::vector<Tensor<T>> dropout_masks;            // per layer
  std::vector<std::vector<std::int64_t>> argmax;   // per layer (MaxPool)
  Tensor<T> logits;                                // input of the terminal softmax
};

// Runs the net; returns softmax probabilities (N, num_classes). For branched
// nets the batch carries 6 channels: 0..2 feed tower 1, 3..5 feed tower 2.
template <typename T>
Tensor<T> net_forward(const NetworkSpec& net, const NetState<T>& state, const Tensor<T>& batch, Phase phase,
                      std::mt19937_64& rng, ForwardCache<T>* cache = nullptr);

// Backward from d(loss)/d(logits); requires a cache from a Phase::Train forward.
template <typename T>
NetState<T> net_backward(const NetworkSpec& net, const NetState<T>& state, const ForwardCache<T>& cache,
                         const Tensor<T>& grad_logits);

// ---- template definitions ----

template <typename T>
NetState<T> init_state(const NetworkSpec& net, std::uint64_t seed, const InitOptions& opt) {
  auto shapes = infer_shapes(net);
  std::mt19937_64 rng(seed);
  NetState<T> st;
  st.params.resize(net.layers.size());
  // input shape per layer mirrors infer_shapes bookkeeping
  std::map<int, std::vector<std::int64_t>> cur;
  if (net.branched) {
    cur[1] = {1, 3, net.input_size, net.input_size};
    cur[2] = {1, net.input_channels - 3, net.input_size, net.input_size};
  } else {
    cur[0] = {1, net.input_channels, net.input_size, net.input_size};
  }
  std::map<int, int> conv_seen;  // per tower
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (l.kind == LayerKind::Concat) {
      cur[0] = shapes[i];
      cur.erase(1);
      cur.erase(2);
      continue;
    }
    const auto& in = cur.at(l.branch);
    if (l.kind == LayerKind::Conv) {
      const int nth = ++conv_seen[l.branch];
      const std::int64_t cin = in[1];
      st.params[i].weight =
          Tensor<T>::randn({l.conv.out_channels, cin / l.conv.groups, l.conv.kernel_h, l.conv.kernel_w},
                           static_cast<T>(opt.conv_std), rng);
      st.params[i].bias = Tensor<T>({l.conv.out_channels});
      if (opt.bias_one && (nth == 1 || nth == 3)) st.params[i].bias.fill(T(1));
    } else if (l.kind == LayerKind::FullyConnected) {
      const std::int64_t d = in[1];
      st.params[i].weight = Tensor<T>::randn({d, l.fc_out}, static_cast<T>(opt.fc_std), rng);
      st.params[i].bias = Tensor<T>({l.fc_out});
      if (opt.bias_one) st.params[i].bias.fill(T(1));
    }
    cur[l.branch] = shapes[i];
  }
  return st;
}

template <typename T>
Tensor<T> net_forward(const NetworkSpec& net, const NetState<T>& state, const Tensor<T>& batch, Phase phase,
                      std::mt19937_64& rng, ForwardCache<T>* cache) {
  if (batch.rank() != 4 || batch.dim(1) != net.input_channels || batch.dim(2) != net.input_size ||
      batch.dim(3) != net.input_size)
    throw ConfigError("forward: batch shape " + batch.shape_str() + " does not match network input");
  if (state.params.size() != net.layers.size()) throw ConfigError("forward: state/layer count mismatch");

  if (cache) {
    cache->inputs.assign(net.layers.size(), Tensor<T>());
    cache->inputs_b.assign(net.layers.size(), Tensor<T>());
    cache->dropout_masks.assign(net.layers.size(), Tensor<T>());
    cache->argmax.assign(net.layers.size(), {});
  }

  const std::int64_t N = batch.dim(0);
  std::map<int, Tensor<T>> act;
  if (net.branched) {
    Tensor<T> a({N, 3, net.input_size, net.input_size});
    Tensor<T> b({N, net.input_channels - 3, net.input_size, net.input_size});
    const std::int64_t plane = net.input_size * net.input_size;
    for (std::int64_t n = 0; n < N; ++n) {
      for (std::int64_t c = 0; c < 3; ++c)
        std::copy_n(batch.data() + ((n * net.input_channels + c) * plane), plane, a.data() + ((n * 3 + c) * plane));
      for (std::int64_t c = 3; c < net.input_channels; ++c)
        std::copy_n(batch.data() + ((n * net.input_channels + c) * plane), plane,
                    b.data() + ((n * (net.input_channels - 3) + (c - 3)) * plane));
    }
    act[1] = std::move(a);
    act[2] = std::move(b);
  } else {
    act[0] = batch;
  }

  Tensor<T> probs;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (l.kind == LayerKind::Concat) {
      Tensor<T>& a = act.at(1);
      Tensor<T>& b = act.at(2);
      if (a.rank() != 2 || b.rank() != 2) throw ConfigError("concat: expects flattened features");
      if (cache) {
        cache->inputs[i] = a;
        cache->inputs_b[i] = b;
      }
      if (l.fusion == FusionKind::Sum) {
        if (a.dim(1) != b.dim(1)) throw ConfigError("sum fusion: feature widths differ");
        Tensor<T> out(a.shape());
        for (std::int64_t j = 0; j < a.numel(); ++j) out[j] = a[j] + b[j];
        act[0] = std::move(out);
      } else {
        const std::int64_t da = a.dim(1), db = b.dim(1);
        Tensor<T> out({N, da + db});
        for (std::int64_t n = 0; n < N; ++n) {
          std::copy_n(a.data() + n * da, da, out.data() + n * (da + db));
          std::copy_n(b.data() + n * db, db, out.data() + n * (da + db) + da);
        }
        act[0] = std::move(out);
      }
      act.erase(1);
      act.erase(2);
      continue;
    }

    Tensor<T>& x = act.at(l.branch);
    if (cache) cache->inputs[i] = x;
    switch (l.kind) {
      case LayerKind::Conv:
        x = conv2d_forward(x, l.conv, state.params[i].weight, state.params[i].bias);
        break;
      case LayerKind::Relu:
        x = relu_forward(x);
        break;
      case LayerKind::MaxPool: {
        auto r = maxpool_forward(x, l.pool_size, l.pool_stride);
        if (cache) cache->argmax[i] = std::move(r.argmax);
        x = std::move(r.output);
        break;
      }
      case LayerKind::Lrn:
        x = lrn_forward(x, l.lrn);
        break;
      case LayerKind::Flatten:
        x = x.reshaped({x.dim(0), x.numel() / x.dim(0)});
        break;
      case LayerKind::FullyConnected:
        x = fc_forward(x, state.params[i].weight, state.params[i].bias);
        break;
      case LayerKind::Dropout: {
        auto r = dropout_forward(x, l.dropout_ratio, phase, rng);
        if (cache) cache->dropout_masks[i] = std::move(r.mask);
        x = std::move(r.output);
        break;
      }
      case LayerKind::Softmax:
        if (cache) cache->logits = x;
        probs = softmax_rows(x);
        break;
      default:
        throw ConfigError("forward: unexpected layer kind");
    }
  }
  if (probs.empty()) throw ConfigError("forward: network has no softmax layer");
  if (!probs.all_finite()) throw TrainingError("forward: non-finite activations");
  return probs;
}

template <typename T>
NetState<T> net_backward(const NetworkSpec& net, const NetState<T>& state, const ForwardCache<T>& cache,
                         const Tensor<T>& grad_logits) {
  if (cache.inputs.size() != net.layers.size()) throw StateError("backward: missing forward cache");
  NetState<T> grads;
  grads.params.resize(net.layers.size());

  std::map<int, Tensor<T>> g;
  g[0] = grad_logits;
  for (std::size_t ri = net.layers.size(); ri-- > 0;) {
    const LayerSpec& l = net.layers[ri];
    if (l.kind == LayerKind::Softmax) continue;  // loss gradient enters below the softmax
    if (l.kind == LayerKind::Concat) {
      Tensor<T>& go = g.at(0);
      const Tensor<T>& a = cache.inputs[ri];
      const Tensor<T>& b = cache.inputs_b[ri];
      const std::int64_t N = a.dim(0), da = a.dim(1), db = b.dim(1);
      if (l.fusion == FusionKind::Sum) {
        g[1] = go;
        g[2] = go;
      } else {
        Tensor<T> ga({N, da}), gb({N, db});
        for (std::int64_t n = 0; n < N; ++n) {
          std::copy_n(go.data() + n * (da + db), da, ga.data() + n * da);
          std::copy_n(go.data() + n * (da + db) + da, db, gb.data() + n * db);
        }
        g[1] = std::move(ga);
        g[2] = std::move(gb);
      }
      g.erase(0);
      continue;
    }

    Tensor<T>& go = g.at(l.branch);
    const Tensor<T>& x = cache.inputs[ri];
    switch (l.kind) {
      case LayerKind::Conv: {
        auto r = conv2d_backward(go, x, l.conv, state.params[ri].weight);
        grads.params[ri].weight = std::move(r.grad_weight);
        grads.params[ri].bias = std::move(r.grad_bias);
        go = std::move(r.grad_input);
        break;
      }
      case LayerKind::Relu:
        go = relu_backward(go, x);
        break;
      case LayerKind::MaxPool:
        go = maxpool_backward(go, cache.argmax[ri], x.shape());
        break;
      case LayerKind::Lrn:
        go = lrn_backward(go, x, l.lrn);
        break;
      case LayerKind::Flatten:
        go = go.reshaped(x.shape());
        break;
      case LayerKind::FullyConnected: {
        auto r = fc_backward(go, x, state.params[ri].weight);
        grads.params[ri].weight = std::move(r.grad_weight);
        grads.params[ri].bias = std::move(r.grad_bias);
        go = std::move(r.grad_input);
        break;
      }
      case LayerKind::Dropout:
        go = dropout_backward(go, cache.dropout_masks[ri]);
        break;
      default:
        throw ConfigError("backward: unexpected layer kind");
    }
  }
  return grads;
}

}  // namespace matforge
