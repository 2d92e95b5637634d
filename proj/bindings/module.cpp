#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>

#include "matforge/analysis.hpp"
#include "matforge/intrinsics.hpp"
#include "matforge/layers.hpp"
#include "matforge/network.hpp"
#include "matforge/optim.hpp"

namespace py = pybind11;
using namespace matforge;

namespace {

template <typename T>
Tensor<T> to_tensor(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  std::vector<std::int64_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<std::size_t>(i)] = a.shape(i);
  Tensor<T> t(shape);
  std::copy_n(a.data(), t.numel(), t.data());
  return t;
}

template <typename T>
py::array_t<T> from_tensor(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<T> a(shape);
  std::copy_n(t.data(), t.numel(), a.mutable_data());
  return a;
}

using ArrD = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ArrF = py::array_t<float, py::array::c_style | py::array::forcecast>;

NetworkSpec spec_from_json(const std::string& s) { return NetworkSpec::from_json(nlohmann::json::parse(s)); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "material classification engine: layers, networks, optimization, intrinsics, analysis";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_IOError);

  // ---- layers (double precision) ----
  m.def("conv2d", [](const ArrD& x, const ArrD& w, const ArrD& b, std::int64_t stride, std::int64_t pad,
                     std::int64_t groups) {
    TensorD wt = to_tensor(w);
    ConvParams p{wt.dim(0), wt.dim(2), wt.dim(3), stride, pad, groups};
    return from_tensor(conv2d_forward(to_tensor(x), p, wt, to_tensor(b)));
  }, py::arg("input"), py::arg("weight"), py::arg("bias"), py::arg("stride") = 1, py::arg("pad") = 0,
     py::arg("groups") = 1);

  m.def("relu", [](const ArrD& x) { return from_tensor(relu_forward(to_tensor(x))); });

  m.def("maxpool", [](const ArrD& x, std::int64_t size, std::int64_t stride) {
    auto r = maxpool_forward(to_tensor(x), size, stride);
    return py::make_tuple(from_tensor(r.output), r.argmax);
  }, py::arg("input"), py::arg("size"), py::arg("stride"));

  m.def("lrn", [](const ArrD& x, std::int64_t n, double alpha, double beta, double k) {
    return from_tensor(lrn_forward(to_tensor(x), LrnParams{n, alpha, beta, k}));
  }, py::arg("input"), py::arg("n") = 5, py::arg("alpha") = 1e-4, py::arg("beta") = 0.75, py::arg("k") = 1.0);

  m.def("fc", [](const ArrD& x, const ArrD& w, const ArrD& b) {
    return from_tensor(fc_forward(to_tensor(x), to_tensor(w), to_tensor(b)));
  });

  m.def("softmax", [](const ArrD& logits) { return from_tensor(softmax_rows(to_tensor(logits))); });

  m.def("softmax_loss", [](const ArrD& logits, const std::vector<int>& labels) {
    auto r = softmax_loss(to_tensor(logits), labels);
    return py::make_tuple(r.loss, from_tensor(r.probs), from_tensor(r.grad_logits));
  });

  // ---- optimization ----
  m.def("lr_at", [](std::int64_t iter, double base_lr, double factor, std::int64_t step) {
    TrainingConfig cfg;
    cfg.base_lr = base_lr;
    cfg.lr_decay_factor = factor;
    cfg.lr_step = step;
    return lr_at(iter, cfg);
  }, py::arg("iteration"), py::arg("base_lr") = 1e-4, py::arg("factor") = 0.1, py::arg("step") = 1000);

  m.def("adagrad_step", [](const ArrD& param, const ArrD& grad, const ArrD& accum, double lr, double eps) {
    TensorD p = to_tensor(param), a = to_tensor(accum);
    adagrad_step(p, to_tensor(grad), a, lr, eps);
    return py::make_tuple(from_tensor(p), from_tensor(a));
  }, py::arg("param"), py::arg("grad"), py::arg("accum"), py::arg("lr"), py::arg("eps") = 1e-8);

  // ---- architectures ----
  m.def("vanilla_spec", [](std::int64_t input_size) { return build_vanilla(input_size).to_json().dump(); },
        py::arg("input_size") = 227);
  m.def("deep_spec", [](std::int64_t input_size) { return build_deep(3, input_size).to_json().dump(); },
        py::arg("input_size") = 227);
  m.def("branched_spec", [](const std::string& fusion, std::int64_t input_size) {
    return build_branched(fusion == "sum" ? FusionKind::Sum : FusionKind::Concat, input_size).to_json().dump();
  }, py::arg("fusion") = "concat", py::arg("input_size") = 227);

  m.def("infer_shapes", [](const std::string& spec_json) { return infer_shapes(spec_from_json(spec_json)); });

  m.def("forward", [](const std::string& spec_json, std::uint64_t seed, const ArrF& batch) {
    NetworkSpec net = spec_from_json(spec_json);
    NetState<float> state = init_state<float>(net, seed);
    std::mt19937_64 rng(0);
    return from_tensor(net_forward(net, state, to_tensor(batch), Phase::Test, rng));
  }, py::arg("spec_json"), py::arg("seed"), py::arg("batch"));

  m.def("train", [](const std::string& spec_json, const std::vector<ArrF>& images, const std::vector<int>& labels,
                    std::int64_t iterations, double lr, std::uint64_t seed, int freeze_k) {
    if (images.size() != labels.size()) throw ConfigError("train: images/labels length mismatch");
    NetworkSpec net = spec_from_json(spec_json);
    std::vector<Sample> data;
    for (std::size_t i = 0; i < images.size(); ++i)
      data.push_back(Sample{"s" + std::to_string(i), to_tensor(images[i]), labels[i]});
    TrainingConfig cfg;
    cfg.base_lr = lr;
    cfg.lr_decay_factor = 1.0;
    cfg.max_iterations = iterations;
    cfg.seed = seed;
    cfg.freeze_k = freeze_k;
    TrainResult r = train(net, init_state<float>(net, seed), freeze_stages(net, freeze_k), data, nullptr, cfg);
    EvalResult ev = evaluate(net, r.state, data, "rgb");
    std::vector<double> losses;
    for (const auto& e : r.log.entries) losses.push_back(e.loss);
    return py::make_tuple(losses, ev.overall_accuracy);
  }, py::arg("spec_json"), py::arg("images"), py::arg("labels"), py::arg("iterations") = 100,
     py::arg("lr") = 1e-3, py::arg("seed") = 0, py::arg("freeze_k") = 0);

  // ---- intrinsics ----
  m.def("decompose", [](const ArrF& image, double sigma, double s_floor) {
    DecomposeOptions opt;
    opt.sigma = sigma;
    opt.s_floor = s_floor;
    IntrinsicPair pair = decompose(to_tensor(image), opt);
    return py::make_tuple(from_tensor(pair.shading), from_tensor(pair.reflectance));
  }, py::arg("image"), py::arg("sigma") = 12.0, py::arg("s_floor") = 1e-3);

  m.def("select_input", [](const ArrF& image, const std::string& mode) {
    return from_tensor(select_input(to_tensor(image), input_mode_from_name(mode)));
  });

  m.def("gaussian_blur", [](const ArrF& plane, double sigma) {
    return from_tensor(gaussian_blur(to_tensor(plane), sigma));
  });

  // ---- analysis ----
  m.def("lm_bank", [] {
    LMBank bank = lm_bank();
    py::array_t<double> out({48, 49, 49});
    for (int k = 0; k < 48; ++k)
      std::copy_n(bank.filters[static_cast<std::size_t>(k)].data(), 49 * 49, out.mutable_data() + k * 49 * 49);
    return out;
  });

  m.def("patch_features", [](const ArrD& patch) {
    static const LMBank bank = lm_bank();
    auto feat = patch_features(to_tensor(patch), bank);
    py::array_t<double> out(std::vector<py::ssize_t>{48});
    std::copy(feat.begin(), feat.end(), out.mutable_data());
    return out;
  });

  m.def("pca_fit", [](const ArrD& features) {
    if (features.ndim() != 2) throw ConfigError("pca_fit: features must be 2-d");
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(features.shape(0)),
                                          std::vector<double>(static_cast<std::size_t>(features.shape(1))));
    for (py::ssize_t i = 0; i < features.shape(0); ++i)
      for (py::ssize_t j = 0; j < features.shape(1); ++j)
        rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = features.at(i, j);
    PCAModel m2 = pca_fit(rows);
    const py::ssize_t d = features.shape(1);
    py::array_t<double> mean(std::vector<py::ssize_t>{d});
    py::array_t<double> comps({static_cast<py::ssize_t>(2), d});
    py::array_t<double> ev(std::vector<py::ssize_t>{2});
    std::copy(m2.mean.begin(), m2.mean.end(), mean.mutable_data());
    for (int c = 0; c < 2; ++c)
      std::copy(m2.components[static_cast<std::size_t>(c)].begin(), m2.components[static_cast<std::size_t>(c)].end(),
                comps.mutable_data() + c * d);
    ev.mutable_at(0) = m2.explained_variance[0];
    ev.mutable_at(1) = m2.explained_variance[1];
    return py::make_tuple(mean, comps, ev);
  });

  m.def("pca_project", [](const ArrD& mean, const ArrD& components, const ArrD& v) {
    PCAModel model;
    model.mean.assign(mean.data(), mean.data() + mean.size());
    for (int c = 0; c < 2; ++c)
      model.components.emplace_back(components.data() + c * mean.size(),
                                    components.data() + (c + 1) * mean.size());
    auto p = pca_project(model, std::vector<double>(v.data(), v.data() + v.size()));
    return py::make_tuple(p[0], p[1]);
  });

  m.def("confusion", [](const std::vector<int>& true_cats, const std::vector<int>& pred_cats, int num_classes) {
    if (true_cats.size() != pred_cats.size()) throw ConfigError("confusion: length mismatch");
    std::vector<PredictionRecord> recs;
    for (std::size_t i = 0; i < true_cats.size(); ++i)
      recs.push_back({std::to_string(i), true_cats[i], pred_cats[i], 0.0, ""});
    ConfusionMatrix cm = confusion(recs, num_classes);
    py::array_t<double> rows({static_cast<py::ssize_t>(num_classes), static_cast<py::ssize_t>(num_classes)});
    for (int i = 0; i < num_classes; ++i)
      std::copy(cm.rows[static_cast<std::size_t>(i)].begin(), cm.rows[static_cast<std::size_t>(i)].end(),
                rows.mutable_data() + i * num_classes);
    return py::make_tuple(rows, cm.per_category_count);
  }, py::arg("true_categories"), py::arg("predicted_categories"), py::arg("num_classes") = 10);
}
