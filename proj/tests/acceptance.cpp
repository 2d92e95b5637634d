// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavy criteria run at reduced input sizes with timing guards.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "matforge/analysis.hpp"
#include "matforge/dataset.hpp"
#include "matforge/gradcheck.hpp"
#include "matforge/image.hpp"
#include "matforge/intrinsics.hpp"
#include "matforge/layers.hpp"
#include "matforge/network.hpp"
#include "matforge/optim.hpp"
#include "matforge/weights_io.hpp"

using namespace matforge;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int idx, bool ok, const std::string& desc, const std::string& detail = "") {
  std::cout << "CRITERION " << idx << " " << (ok ? "PASS" : "FAIL") << " — " << desc;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

TensorD random_tensor(const std::vector<std::int64_t>& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  TensorD t(shape);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = n(rng);
  return t;
}

double weighted_sum(const TensorD& t, const TensorD& coefs) {
  double s = 0.0;
  for (std::int64_t i = 0; i < t.numel(); ++i) s += t[i] * coefs[i];
  return s;
}

std::vector<Sample> solid_color_set(std::int64_t size, int per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> noise(-0.02f, 0.02f);
  std::vector<Sample> out;
  for (int cls = 0; cls < 10; ++cls) {
    const float r = static_cast<float>((cls * 7) % 10) / 10.0f;
    const float g = static_cast<float>((cls * 3) % 10) / 10.0f;
    const float b = static_cast<float>(cls) / 10.0f;
    for (int i = 0; i < per_class; ++i) {
      TensorF img({3, size, size});
      const std::int64_t plane = size * size;
      for (std::int64_t j = 0; j < plane; ++j) {
        img[j] = r + noise(rng);
        img[plane + j] = g + noise(rng);
        img[2 * plane + j] = b + noise(rng);
      }
      out.push_back(Sample{"c" + std::to_string(cls) + "_" + std::to_string(i), std::move(img), cls});
    }
  }
  return out;
}

bool bit_identical(const TensorF& a, const TensorF& b) {
  if (!a.same_shape(b)) return false;
  for (std::int64_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

// ---------------------------------------------------------------- criterion 1

bool gradient_suite(std::string& detail) {
  const double tol = 1e-5;
  double worst = 0.0;
  const auto t0 = Clock::now();

  struct ConvCase {
    std::vector<std::int64_t> in;
    ConvParams p;
  };
  const ConvCase conv_cases[] = {
      {{1, 2, 5, 5}, {3, 3, 3, 1, 0, 1}}, {{2, 3, 6, 6}, {4, 3, 3, 1, 1, 1}}, {{1, 4, 6, 6}, {4, 3, 3, 2, 1, 2}},
      {{2, 2, 7, 7}, {2, 5, 5, 2, 2, 1}}, {{1, 6, 5, 5}, {6, 1, 1, 1, 0, 3}},
  };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const ConvCase& cc = conv_cases[seed];
    TensorD x = random_tensor(cc.in, rng);
    TensorD w = random_tensor({cc.p.out_channels, cc.in[1] / cc.p.groups, cc.p.kernel_h, cc.p.kernel_w}, rng);
    TensorD b = random_tensor({cc.p.out_channels}, rng);
    TensorD coefs = random_tensor({cc.in[0], cc.p.out_channels, cc.p.out_h(cc.in[2]), cc.p.out_w(cc.in[3])}, rng);
    auto loss = [&] { return weighted_sum(conv2d_forward(x, cc.p, w, b), coefs); };
    auto g = conv2d_backward(coefs, x, cc.p, w);
    worst = std::max({worst, check_gradient(x, g.grad_input, loss), check_gradient(w, g.grad_weight, loss),
                      check_gradient(b, g.grad_bias, loss)});
  }

  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    std::mt19937_64 rng(seed);
    TensorD x = random_tensor({2, 3 + static_cast<std::int64_t>(seed % 4)}, rng);
    for (std::int64_t i = 0; i < x.numel(); ++i)
      if (std::abs(x[i]) < 1e-3) x[i] = 0.5;  // keep clear of the kink
    TensorD coefs = random_tensor(x.shape(), rng);
    auto loss = [&] { return weighted_sum(relu_forward(x), coefs); };
    worst = std::max(worst, check_gradient(x, relu_backward(coefs, x), loss));
  }

  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    std::mt19937_64 rng(seed);
    const std::int64_t H = 4 + static_cast<std::int64_t>(seed % 3);
    TensorD x = random_tensor({1, 2, H, H}, rng);
    auto fwd = maxpool_forward(x, 2, 2);
    TensorD coefs = random_tensor(fwd.output.shape(), rng);
    auto loss = [&] { return weighted_sum(maxpool_forward(x, 2, 2).output, coefs); };
    TensorD analytic = maxpool_backward(coefs, fwd.argmax, x.shape());
    worst = std::max(worst, check_gradient(x, analytic, loss));
  }

  const LrnParams lp{5, 1e-4, 0.75, 1.0};
  for (std::uint64_t seed = 30; seed < 35; ++seed) {
    std::mt19937_64 rng(seed);
    TensorD x = random_tensor({1, 3 + static_cast<std::int64_t>(seed % 5), 3, 3}, rng);
    TensorD coefs = random_tensor(x.shape(), rng);
    auto loss = [&] { return weighted_sum(lrn_forward(x, lp), coefs); };
    worst = std::max(worst, check_gradient(x, lrn_backward(coefs, x, lp), loss));
  }

  for (std::uint64_t seed = 40; seed < 45; ++seed) {
    std::mt19937_64 rng(seed);
    const std::int64_t D = 3 + static_cast<std::int64_t>(seed % 4), M = 2 + static_cast<std::int64_t>(seed % 3);
    TensorD x = random_tensor({2, D}, rng);
    TensorD w = random_tensor({D, M}, rng);
    TensorD b = random_tensor({M}, rng);
    TensorD coefs = random_tensor({2, M}, rng);
    auto loss = [&] { return weighted_sum(fc_forward(x, w, b), coefs); };
    auto g = fc_backward(coefs, x, w);
    worst = std::max({worst, check_gradient(x, g.grad_input, loss), check_gradient(w, g.grad_weight, loss),
                      check_gradient(b, g.grad_bias, loss)});
  }

  for (std::uint64_t seed = 50; seed < 55; ++seed) {
    std::mt19937_64 rng(seed);
    const std::int64_t K = 4 + static_cast<std::int64_t>(seed % 7);
    TensorD logits = random_tensor({3, K}, rng);
    std::vector<int> labels;
    std::uniform_int_distribution<int> lab(0, static_cast<int>(K) - 1);
    for (int n = 0; n < 3; ++n) labels.push_back(lab(rng));
    auto loss = [&] { return softmax_loss(logits, labels).loss; };
    TensorD analytic = softmax_loss(logits, labels).grad_logits;
    worst = std::max(worst, check_gradient(logits, analytic, loss));
  }

  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << "max rel err " << worst << ", " << dt << "s";
  detail = os.str();
  return worst < tol && dt < 60.0;
}

// ---------------------------------------------------------------- criterion 2

bool architecture_shapes(std::string& detail) {
  NetworkSpec vanilla = build_vanilla(227);
  auto vs = infer_shapes(vanilla);
  bool ok = vs[0] == std::vector<std::int64_t>{1, 96, 55, 55} && vs[2] == std::vector<std::int64_t>{1, 96, 9, 9} &&
            vs[4] == std::vector<std::int64_t>{1, 7776} && vs[5] == std::vector<std::int64_t>{1, 4096} &&
            vs[7] == std::vector<std::int64_t>{1, 10};
  std::vector<LayerKind> vkinds;
  for (const auto& l : vanilla.layers) vkinds.push_back(l.kind);
  ok = ok && vkinds == std::vector<LayerKind>{LayerKind::Conv,    LayerKind::Relu,           LayerKind::MaxPool,
                                              LayerKind::Dropout, LayerKind::Flatten,        LayerKind::FullyConnected,
                                              LayerKind::Relu,    LayerKind::FullyConnected, LayerKind::Softmax};

  NetworkSpec deep = build_deep();
  auto ds = infer_shapes(deep);
  std::vector<std::int64_t> filters, spatial;
  for (std::size_t i = 0; i < deep.layers.size(); ++i) {
    if (deep.layers[i].kind == LayerKind::Conv) filters.push_back(deep.layers[i].conv.out_channels);
    if (deep.layers[i].kind == LayerKind::Conv || deep.layers[i].kind == LayerKind::MaxPool)
      spatial.push_back(ds[i][2]);
  }
  ok = ok && filters == std::vector<std::int64_t>{96, 256, 384, 384, 384};
  // conv1 pool1 conv2 pool2 conv3 conv4 conv5 pool5
  ok = ok && spatial == std::vector<std::int64_t>{55, 27, 27, 13, 13, 13, 13, 6};
  detail = "vanilla 55/9/7776, deep 55-27-13-13-13-6";
  return ok;
}

// ---------------------------------------------------------------- criterion 3

bool freeze_invariance(std::string& detail) {
  const auto t0 = Clock::now();
  NetworkSpec net = build_deep(3, 67);
  auto data = solid_color_set(80, 3, 5);
  TrainingConfig cfg;
  cfg.base_lr = 1e-3;
  cfg.lr_decay_factor = 1.0;
  cfg.max_iterations = 200;
  cfg.seed = 11;

  NetState<float> init = init_state<float>(net, 1);

  auto run = [&](int k) { return train(net, init, freeze_stages(net, k), data, nullptr, cfg).state; };
  NetState<float> all_frozen = run(5);
  NetState<float> one_frozen = run(1);

  bool ok = true;
  bool head_moved = false, stage2_moved = false;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (init.params[i].weight.empty()) continue;
    const int stage = net.layers[i].stage_index;
    const bool same5 = bit_identical(all_frozen.params[i].weight, init.params[i].weight) &&
                       bit_identical(all_frozen.params[i].bias, init.params[i].bias);
    const bool same1 = bit_identical(one_frozen.params[i].weight, init.params[i].weight);
    if (stage >= 1) ok = ok && same5;  // freeze_k=5: every filter stage untouched
    if (stage == 0) head_moved = head_moved || !bit_identical(all_frozen.params[i].weight, init.params[i].weight);
    if (stage == 1) ok = ok && same1;  // freeze_k=1: stage 1 untouched
    if (stage >= 2) stage2_moved = stage2_moved || !same1;
  }
  ok = ok && head_moved && stage2_moved;

  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << dt << "s";
  detail = os.str();
  return ok && dt < 120.0;
}

// ---------------------------------------------------------------- criterion 4

bool adagrad_oracle(std::string& detail) {
  // independent scalar recurrence
  double param_ref = 0.7, accum_ref = 0.0;
  const double lr = 0.1, eps = 1e-8;
  const double grads[10] = {0.3, -0.5, 1.2, 0.05, -0.9, 0.4, 0.0, 2.0, -0.1, 0.7};

  TensorF p({1}), a({1});
  p[0] = 0.7f;
  double max_diff = 0.0;
  for (double g : grads) {
    accum_ref += g * g;
    param_ref -= lr * g / (std::sqrt(accum_ref) + eps);
    TensorF gt({1});
    gt[0] = static_cast<float>(g);
    adagrad_step(p, gt, a, lr, eps);
    max_diff = std::max(max_diff, std::abs(static_cast<double>(p[0]) - param_ref));
  }

  TrainingConfig cfg;  // protocol defaults
  const bool lr_ok = std::abs(lr_at(0, cfg) - 1e-4) < 1e-16 && std::abs(lr_at(1000, cfg) - 1e-5) < 1e-16 &&
                     std::abs(lr_at(999, cfg) - 1e-4) < 1e-16;

  std::ostringstream os;
  os << "max drift " << max_diff;
  detail = os.str();
  // float32 state vs double reference: bounded by float rounding, and the
  // double-path recurrence itself agrees to 1e-12 (verified in unit tests)
  TensorD pd({1}), ad({1});
  pd[0] = 0.7;
  double ref2 = 0.7, acc2 = 0.0, drift2 = 0.0;
  for (double g : grads) {
    acc2 += g * g;
    ref2 -= lr * g / (std::sqrt(acc2) + eps);
    TensorD gt({1});
    gt[0] = g;
    adagrad_step(pd, gt, ad, lr, eps);
    drift2 = std::max(drift2, std::abs(pd[0] - ref2));
  }
  return drift2 < 1e-12 && max_diff < 1e-6 && lr_ok;
}

// ---------------------------------------------------------------- criterion 5

bool overfit_smoke(std::string& detail, TrainResult* out_result = nullptr) {
  const auto t0 = Clock::now();
  NetworkSpec net = build_vanilla(67);
  auto data = solid_color_set(80, 5, 42);
  TrainingConfig cfg;
  cfg.base_lr = 3e-3;
  cfg.lr_decay_factor = 1.0;
  cfg.max_iterations = 2000;
  cfg.seed = 9;

  TrainResult r = train(net, init_state<float>(net, 3), freeze_stages(net, 0), data, nullptr, cfg);
  EvalResult ev = evaluate(net, r.state, data, "rgb");
  const double dt = seconds_since(t0);

  std::ostringstream os;
  os << "train acc " << ev.overall_accuracy << " after " << cfg.max_iterations << " iters, " << dt << "s";
  detail = os.str();
  if (out_result) *out_result = std::move(r);
  return ev.overall_accuracy >= 0.98 && cfg.max_iterations <= 5000 && dt < 600.0;
}

// ---------------------------------------------------------------- criterion 6

bool intrinsic_reconstruction(std::string& detail) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);
  double worst = 0.0;
  bool shapes_ok = true;
  for (int t = 0; t < 20; ++t) {
    const std::int64_t h = 16 + (t % 5) * 7, w = 16 + (t % 3) * 11;
    TensorF img({3, h, w});
    for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = uni(rng);
    IntrinsicPair pair = decompose(img);
    shapes_ok = shapes_ok && pair.shading.dim(0) == 1 && pair.reflectance.dim(0) == 3;
    worst = std::max(worst, reconstruction_error(img, pair));
  }
  std::ostringstream os;
  os << "max |I - s*R| = " << worst;
  detail = os.str();
  return shapes_ok && worst <= 1e-6;
}

// ---------------------------------------------------------------- criterion 7

bool dataset_pipeline(std::string& detail) {
  const fs::path root = fs::temp_directory_path() / ("matforge_acc_" + std::to_string(std::random_device{}()));
  const fs::path corpus = root / "corpus", out = root / "out";
  fs::create_directories(corpus);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);
  auto noise = [&](std::int64_t h, std::int64_t w) {
    TensorF img({3, h, w});
    for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = uni(rng);
    return img;
  };

  save_image(noise(400, 500), (corpus / "good.png").string());
  fs::copy(corpus / "good.png", corpus / "zz_dup.png");
  save_image(noise(300, 399), (corpus / "small.png").string());
  TensorF gray({3, 350, 450});
  for (std::int64_t i = 0; i < 350 * 450; ++i) {
    const float v = uni(rng);
    gray[i] = gray[350 * 450 + i] = gray[2 * 350 * 450 + i] = v;
  }
  save_image(gray, (corpus / "gray.png").string());
  TensorF blank({3, 350, 450});
  blank.fill(0.5f);
  save_image(blank, (corpus / "blank.png").string());
  TensorF bordered({3, 500, 560});
  bordered.fill(1.0f);
  TensorF inner = noise(420, 480);
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < 420; ++y)
      std::copy_n(inner.data() + (c * 420 + y) * 480, 480, bordered.data() + (c * 500 + y + 40) * 560 + 40);
  save_image(bordered, (corpus / "bordered.png").string());

  std::vector<Annotation> ann = {
      {"good.png", "wood", std::nullopt, {}},    {"zz_dup.png", "wood", std::nullopt, {}},
      {"small.png", "metal", std::nullopt, {}},  {"gray.png", "stone", std::nullopt, {}},
      {"blank.png", "paper", std::nullopt, {}},  {"bordered.png", "fabric", std::nullopt, {}},
  };
  IngestReport rep;
  DatasetManifest ingested = ingest(corpus.string(), ann, out.string(), &rep);

  auto reason = [&](const std::string& f) {
    for (const auto& r : rep.rejected)
      if (r.path == f) return r.reason;
    return std::string();
  };
  bool ok = ingested.records.size() == 2 && reason("zz_dup.png") == "duplicate" &&
            reason("small.png") == "too small" && reason("gray.png") == "grayscale" &&
            reason("blank.png") == "blank";

  // split quotas on a synthetic manifest
  DatasetManifest big;
  for (const char* cat : kCategories)
    for (int i = 0; i < 340; ++i) {
      SampleRecord r;
      r.image_path = std::string(cat) + std::to_string(i);
      r.category = cat;
      big.records.push_back(std::move(r));
    }
  DatasetManifest split = split_dataset(big, 13);
  for (auto v : split.category_counts(Split::Val)) ok = ok && v == 200;
  for (auto v : split.category_counts(Split::Test)) ok = ok && v == 100;

  DatasetManifest fmd;
  for (const char* cat : kCategories)
    for (int i = 0; i < 100; ++i) {
      SampleRecord r;
      r.image_path = std::string(cat) + std::to_string(i);
      r.category = cat;
      fmd.records.push_back(std::move(r));
    }
  DatasetManifest fsplit = fmd_split(fmd, 21);
  std::int64_t train_n = 0, test_n = 0;
  for (const auto& r : fsplit.records) (r.split == Split::Test ? test_n : train_n)++;
  ok = ok && train_n == 800 && test_n == 200;

  fs::remove_all(root);
  std::ostringstream os;
  os << "accepted " << ingested.records.size() << "/6, fmd " << train_n << "/" << test_n;
  detail = os.str();
  return ok;
}

// ---------------------------------------------------------------- criterion 8

bool analysis_properties(std::string& detail) {
  bool ok = true;

  // confusion rows
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cat(0, 9);
  std::vector<PredictionRecord> recs;
  for (int i = 0; i < 5000; ++i) recs.push_back({"s" + std::to_string(i), cat(rng), cat(rng), 0.5, "rgb"});
  ConfusionMatrix cm = confusion(recs);
  for (const auto& row : cm.rows) {
    double sum = 0.0;
    for (double v : row) sum += v;
    ok = ok && std::abs(sum - 1.0) < 1e-9;
  }

  // PCA on exact rank-2 data
  std::normal_distribution<double> na(0.0, 3.0), nb(0.0, 1.0);
  const double r2 = 1.0 / std::sqrt(2.0);
  std::vector<double> u = {r2, r2, 0, 0, 0}, v = {0, 0, r2, r2, 0};
  std::vector<std::vector<double>> data;
  for (int i = 0; i < 100; ++i) {
    const double a = na(rng), b = nb(rng);
    std::vector<double> x(5);
    for (int j = 0; j < 5; ++j) x[static_cast<std::size_t>(j)] = a * u[static_cast<std::size_t>(j)] + b * v[static_cast<std::size_t>(j)];
    data.push_back(std::move(x));
  }
  PCAModel model = pca_fit(data);
  auto dot = [](const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
  };
  ok = ok && std::abs(dot(model.components[0], model.components[0]) - 1.0) < 1e-8;
  ok = ok && std::abs(dot(model.components[1], model.components[1]) - 1.0) < 1e-8;
  ok = ok && std::abs(dot(model.components[0], model.components[1])) < 1e-8;
  for (const auto& x : data) {
    auto p = pca_project(model, x);
    for (std::size_t j = 0; j < 5; ++j) {
      const double rec = model.mean[j] + p[0] * model.components[0][j] + p[1] * model.components[1][j];
      ok = ok && std::abs(rec - x[j]) < 1e-8;
    }
  }

  // filter bank
  LMBank bank = lm_bank();
  ok = ok && bank.filters.size() == 48;
  for (int k = 0; k < 44; ++k) {
    double sum = 0.0;
    for (std::int64_t i = 0; i < bank.filters[static_cast<std::size_t>(k)].numel(); ++i)
      sum += bank.filters[static_cast<std::size_t>(k)][i];
    ok = ok && std::abs(sum) < 1e-10;
  }

  detail = "confusion rows 1e-9, PCA orthonormal + exact, 48 filters";
  return ok;
}

// ---------------------------------------------------------------- criterion 9

bool dropout_expectation(std::string& detail) {
  std::mt19937_64 rng(8);
  TensorD x({4, 8});
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    x[i] = n(rng);
    if (std::abs(x[i]) < 0.1) x[i] = 0.5;  // keep relative comparisons meaningful
  }
  TensorD test_out = dropout_forward(x, 0.5, Phase::Test, rng).output;

  TensorD mean(x.shape());
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    TensorD out = dropout_forward(x, 0.5, Phase::Train, rng).output;
    for (std::int64_t i = 0; i < x.numel(); ++i) mean[i] += out[i];
  }
  double worst = 0.0;
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    mean[i] /= static_cast<double>(trials);
    worst = std::max(worst, std::abs(mean[i] - test_out[i]) / std::abs(test_out[i]));
  }
  std::ostringstream os;
  os << "max rel deviation " << worst;
  detail = os.str();
  return worst < 0.02;
}

// --------------------------------------------------------------- criterion 10

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool reproducibility(std::string& detail) {
  const fs::path root = fs::temp_directory_path() / ("matforge_rep_" + std::to_string(std::random_device{}()));
  fs::create_directories(root / "images");

  // toy dataset the CLI can consume: pre-split manifest over saved PNGs
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);
  DatasetManifest manifest;
  for (std::size_t c = 0; c < kCategories.size(); ++c) {
    for (int i = 0; i < 3; ++i) {
      TensorF img({3, 80, 80});
      for (std::int64_t k = 0; k < img.numel(); ++k)
        img[k] = std::min(1.0f, uni(rng) * 0.5f + 0.05f * static_cast<float>(c));
      const fs::path p = root / "images" / (std::string(kCategories[c]) + "_" + std::to_string(i) + ".png");
      save_image(img, p.string());
      SampleRecord rec;
      rec.image_path = p.string();
      rec.category = kCategories[c];
      rec.split = i == 2 ? Split::Test : Split::Train;
      manifest.records.push_back(std::move(rec));
    }
  }
  save_manifest(manifest, (root / "manifest.jsonl").string());

  auto run = [&](const std::string& out) {
    std::ostringstream cmd;
    cmd << MATFORGE_CLI_PATH << " train --arch vanilla --data " << (root / "manifest.jsonl").string()
        << " --mode rgb --input-size 35 --iters 40 --lr 0.001 --seed 7 --out " << out << " > /dev/null";
    return std::system(cmd.str().c_str());
  };
  const fs::path o1 = root / "run1", o2 = root / "run2";
  bool ok = run(o1.string()) == 0 && run(o2.string()) == 0;

  if (ok) {
    ok = slurp(o1 / "train_log.csv") == slurp(o2 / "train_log.csv");
    for (const auto& e : fs::directory_iterator(o1 / "checkpoint"))
      ok = ok && slurp(e.path()) == slurp(o2 / "checkpoint" / e.path().filename());
    ok = ok && !slurp(o1 / "checkpoint" / "manifest.json").empty();
  }
  fs::remove_all(root);
  detail = "two CLI runs, identical config and seed";
  return ok;
}

}  // namespace

int main() {
  std::string d;
  report(1, gradient_suite(d), "gradient suite: all layers < 1e-5 across 5 seeded shapes each", d);
  report(2, architecture_shapes(d), "architecture shapes match the published layouts", d);
  report(3, freeze_invariance(d), "frozen filter stages stay bit-identical through training", d);
  report(4, adagrad_oracle(d), "AdaGrad recurrence matches brute force; lr schedule boundaries", d);
  report(5, overfit_smoke(d), "vanilla net overfits a synthetic 10-class 50-image set to >= 98%", d);
  report(6, intrinsic_reconstruction(d), "intrinsic decomposition reconstructs within 1e-6", d);
  report(7, dataset_pipeline(d), "ingest rules and split quotas", d);
  report(8, analysis_properties(d), "confusion row-stochastic, PCA exact on rank-2, 48-filter bank", d);
  report(9, dropout_expectation(d), "inverted dropout expectation within 2% of test mode", d);
  report(10, reproducibility(d), "identical configs give bit-identical checkpoints and CSVs", d);

  if (g_failures) {
    std::cout << g_failures << " criterion(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all criteria passed" << std::endl;
  return 0;
}
