#include <doctest.h>

#include <random>

#include "matforge/network.hpp"

using namespace matforge;

namespace {

std::vector<LayerKind> kinds(const NetworkSpec& net) {
  std::vector<LayerKind> out;
  for (const auto& l : net.layers) out.push_back(l.kind);
  return out;
}

}  // namespace

TEST_CASE("vanilla layout and shape arithmetic at 227") {
  NetworkSpec net = build_vanilla(227);
  CHECK(net.num_classes == 10);
  CHECK(kinds(net) == std::vector<LayerKind>{LayerKind::Conv, LayerKind::Relu, LayerKind::MaxPool,
                                             LayerKind::Dropout, LayerKind::Flatten, LayerKind::FullyConnected,
                                             LayerKind::Relu, LayerKind::FullyConnected, LayerKind::Softmax});
  auto shapes = infer_shapes(net);
  CHECK(shapes[0] == std::vector<std::int64_t>{1, 96, 55, 55});
  CHECK(shapes[2] == std::vector<std::int64_t>{1, 96, 9, 9});
  CHECK(shapes[4] == std::vector<std::int64_t>{1, 7776});
  CHECK(shapes[5] == std::vector<std::int64_t>{1, 4096});
  CHECK(shapes[7] == std::vector<std::int64_t>{1, 10});
  CHECK(net.layers[0].conv.stride == 4);
  CHECK(net.layers[0].conv.pad == 0);
  CHECK(net.layers[2].pool_stride == 6);
}

TEST_CASE("vanilla rejects too-small inputs") {
  CHECK_THROWS_AS(build_vanilla(20), ConfigError);
}

TEST_CASE("deep net: five filter stages, filter counts, spatial sizes") {
  NetworkSpec net = build_deep();
  std::vector<std::int64_t> filters;
  for (const auto& l : net.layers)
    if (l.kind == LayerKind::Conv) filters.push_back(l.conv.out_channels);
  CHECK(filters == std::vector<std::int64_t>{96, 256, 384, 384, 384});

  // stage 5 has a pool but no normalization layer
  bool stage5_pool = false, stage5_lrn = false;
  for (const auto& l : net.layers) {
    if (l.stage_index == 5 && l.kind == LayerKind::MaxPool) stage5_pool = true;
    if (l.stage_index == 5 && l.kind == LayerKind::Lrn) stage5_lrn = true;
  }
  CHECK(stage5_pool);
  CHECK_FALSE(stage5_lrn);

  // stage indices: five filter stages, head at 0
  CHECK(max_stage(net) == 5);

  auto shapes = infer_shapes(net);
  std::vector<std::int64_t> spatial;  // after conv1 and after each stage's last layer
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (shapes[i].size() == 4) spatial.push_back(shapes[i][2]);
  CHECK(spatial.front() == 55);   // conv1
  CHECK(shapes[2][2] == 27);      // pool1
  CHECK(shapes[6][2] == 13);      // pool2
  CHECK(shapes[8][2] == 13);      // conv3
  CHECK(shapes[10][2] == 13);     // conv4
  CHECK(shapes[14][2] == 6);      // pool5
  CHECK(shapes[15] == std::vector<std::int64_t>{1, 384 * 6 * 6});
}

TEST_CASE("branched net fuses 4096+4096 and keeps all filter stages frozen") {
  NetworkSpec net = build_branched();
  auto shapes = infer_shapes(net);
  std::size_t concat_idx = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (net.layers[i].kind == LayerKind::Concat) concat_idx = i;
  CHECK(shapes[concat_idx] == std::vector<std::int64_t>{1, 8192});
  CHECK(net.num_classes == 10);
  CHECK(net.input_channels == 6);

  FreezeMask mask = freeze_stages(net, 5);
  for (int s = 1; s <= 5; ++s) CHECK(mask.frozen(s));
  CHECK_FALSE(mask.frozen(0));
}

TEST_CASE("freeze_stages bounds") {
  NetworkSpec net = build_deep();
  FreezeMask all = freeze_stages(net, 5);
  CHECK(all.frozen_stages == std::set<int>{1, 2, 3, 4, 5});
  FreezeMask one = freeze_stages(net, 1);
  CHECK(one.frozen_stages == std::set<int>{1});
  FreezeMask none = freeze_stages(net, 0);
  CHECK(none.frozen_stages.empty());
  CHECK_THROWS_AS(freeze_stages(net, 6), ConfigError);
  CHECK_THROWS_AS(freeze_stages(net, -1), ConfigError);
}

TEST_CASE("forward emits probability rows and is deterministic") {
  NetworkSpec net = build_vanilla(35);
  NetState<float> st = init_state<float>(net, 42);
  std::mt19937_64 rng(7), data_rng(1);
  TensorF batch = TensorF::randn({3, 3, 35, 35}, 1.0f, data_rng);
  // two identical rows
  for (std::int64_t i = 0; i < 3 * 35 * 35; ++i) batch[1 * 3 * 35 * 35 + i] = batch[i];

  TensorF probs = net_forward(net, st, batch, Phase::Test, rng);
  for (std::int64_t n = 0; n < 3; ++n) {
    double sum = 0.0;
    for (int k = 0; k < 10; ++k) {
      const float p = probs[n * 10 + k];
      CHECK(p >= 0.0f);
      CHECK(p <= 1.0f);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
  for (int k = 0; k < 10; ++k) CHECK(probs[k] == probs[10 + k]);
}

TEST_CASE("batched forward equals stacked single-sample forwards") {
  NetworkSpec net = build_vanilla(35);
  NetState<float> st = init_state<float>(net, 5);
  std::mt19937_64 rng(0), data_rng(2);
  TensorF batch = TensorF::randn({4, 3, 35, 35}, 1.0f, data_rng);
  TensorF probs = net_forward(net, st, batch, Phase::Test, rng);

  const std::int64_t per = 3 * 35 * 35;
  for (std::int64_t n = 0; n < 4; ++n) {
    TensorF one({1, 3, 35, 35});
    std::copy_n(batch.data() + n * per, per, one.data());
    TensorF p1 = net_forward(net, st, one, Phase::Test, rng);
    for (int k = 0; k < 10; ++k) CHECK(p1[k] == doctest::Approx(probs[n * 10 + k]).epsilon(1e-6));
  }
}

TEST_CASE("branched net with duplicated-and-halved shared weights matches a single tower") {
  // tiny single tower: conv(4) - relu - flatten - fc(10) - softmax
  NetworkSpec single;
  single.input_channels = 3;
  single.input_size = 8;
  single.num_classes = 10;
  {
    LayerSpec c;
    c.kind = LayerKind::Conv;
    c.name = "conv1";
    c.stage_index = 1;
    c.conv = ConvParams{4, 3, 3, 1, 0, 1};
    single.layers.push_back(c);
    single.layers.push_back(LayerSpec{LayerKind::Relu, "relu1", 1});
    single.layers.push_back(LayerSpec{LayerKind::Flatten, "flatten", 0});
    LayerSpec f;
    f.kind = LayerKind::FullyConnected;
    f.name = "fc";
    f.fc_out = 10;
    single.layers.push_back(f);
    single.layers.push_back(LayerSpec{LayerKind::Softmax, "prob", 0});
  }

  NetworkSpec branched;
  branched.branched = true;
  branched.input_channels = 6;
  branched.input_size = 8;
  branched.num_classes = 10;
  for (int b = 1; b <= 2; ++b) {
    const std::string p = b == 1 ? "a_" : "b_";
    LayerSpec c;
    c.kind = LayerKind::Conv;
    c.name = p + "conv1";
    c.stage_index = 1;
    c.branch = b;
    c.conv = ConvParams{4, 3, 3, 1, 0, 1};
    branched.layers.push_back(c);
    LayerSpec r{LayerKind::Relu, p + "relu1", 1};
    r.branch = b;
    branched.layers.push_back(r);
    LayerSpec fl{LayerKind::Flatten, p + "flatten", 0};
    fl.branch = b;
    branched.layers.push_back(fl);
  }
  branched.layers.push_back(LayerSpec{LayerKind::Concat, "fuse", 0});
  LayerSpec f;
  f.kind = LayerKind::FullyConnected;
  f.name = "fc";
  f.fc_out = 10;
  branched.layers.push_back(f);
  branched.layers.push_back(LayerSpec{LayerKind::Softmax, "prob", 0});

  NetState<float> st_single = init_state<float>(single, 77);
  NetState<float> st_branched = init_state<float>(branched, 0);
  // both towers share the single tower's conv weights
  st_branched.params[0] = st_single.params[0];
  st_branched.params[3] = st_single.params[0];
  // shared fc = single fc duplicated and halved
  const TensorF& W = st_single.params[3].weight;  // (D, 10)
  const std::int64_t D = W.dim(0);
  TensorF W2({2 * D, 10});
  for (std::int64_t d = 0; d < D; ++d)
    for (int k = 0; k < 10; ++k) {
      W2[d * 10 + k] = W[d * 10 + k] * 0.5f;
      W2[(D + d) * 10 + k] = W[d * 10 + k] * 0.5f;
    }
  st_branched.params[7].weight = W2;
  st_branched.params[7].bias = st_single.params[3].bias;

  std::mt19937_64 rng(0), data_rng(3);
  TensorF img = TensorF::randn({1, 3, 8, 8}, 1.0f, data_rng);
  TensorF both({1, 6, 8, 8});
  std::copy_n(img.data(), img.numel(), both.data());
  std::copy_n(img.data(), img.numel(), both.data() + img.numel());

  TensorF ps = net_forward(single, st_single, img, Phase::Test, rng);
  TensorF pb = net_forward(branched, st_branched, both, Phase::Test, rng);
  for (int k = 0; k < 10; ++k) CHECK(pb[k] == doctest::Approx(ps[k]).epsilon(1e-5));
}

TEST_CASE("sum fusion is available behind the flag") {
  NetworkSpec net = build_branched(FusionKind::Sum);
  auto shapes = infer_shapes(net);
  std::size_t concat_idx = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (net.layers[i].kind == LayerKind::Concat) concat_idx = i;
  CHECK(shapes[concat_idx] == std::vector<std::int64_t>{1, 4096});
}

TEST_CASE("architecture JSON round-trips losslessly") {
  for (const NetworkSpec& net : {build_vanilla(227), build_deep(), build_branched()}) {
    nlohmann::json j = net.to_json();
    NetworkSpec back = NetworkSpec::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(infer_shapes(back) == infer_shapes(net));
  }
}
