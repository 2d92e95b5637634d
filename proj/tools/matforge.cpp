#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "matforge/analysis.hpp"
#include "matforge/dataset.hpp"
#include "matforge/image.hpp"
#include "matforge/intrinsics.hpp"
#include "matforge/network.hpp"
#include "matforge/optim.hpp"
#include "matforge/weights_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace matforge;

namespace {

// --config FILE provides defaults; explicit flags win. The file is read
// before CLI11 parses so its values become option defaults.
json load_config_json(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream in(argv[i + 1]);
      if (!in) throw IoError("cannot open config file: " + std::string(argv[i + 1]));
      return json::parse(in);
    }
  }
  return json::object();
}

void write_run_json(const std::string& out_dir, const json& resolved) {
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "run.json");
  if (!out) throw IoError("cannot write run.json under " + out_dir);
  out << resolved.dump(2) << "\n";
}

NetworkSpec build_arch(const std::string& arch, std::int64_t input_size, const std::string& fusion) {
  if (arch == "vanilla") return build_vanilla(input_size);
  if (arch == "deep") return build_deep(3, input_size);
  if (arch == "branched")
    return build_branched(fusion == "sum" ? FusionKind::Sum : FusionKind::Concat, input_size);
  throw ConfigError("unknown architecture: " + arch);
}

// Pretrained weight directories hold a single deep tower (conv1..conv5).
NameMap pretrained_map(const NetworkSpec& net) {
  NameMap map;
  for (const auto& l : net.layers) {
    if (!l.has_params() || l.stage_index == 0) continue;
    std::string src = l.name;
    for (const char* prefix : {"refl_", "shad_"})
      if (src.rfind(prefix, 0) == 0) src = src.substr(std::string(prefix).size());
    map[src + ".weight"] = l.name + ".weight";
    map[src + ".bias"] = l.name + ".bias";
  }
  return map;
}

std::vector<Sample> load_split(const DatasetManifest& manifest, const std::string& split, InputMode mode) {
  std::vector<Sample> out;
  for (const auto& r : manifest.records) {
    if (split != "all" && split_name(r.split) != split) continue;
    Sample s;
    s.id = fs::path(r.image_path).stem().string();
    s.image = select_input(load_image_rgb(r.image_path), mode);
    s.label = category_index(r.category);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw ConfigError("no samples in split '" + split + "'");
  return out;
}

NetState<float> load_checkpoint(const NetworkSpec& net, const std::string& dir) {
  NetState<float> state = init_state<float>(net, 0);
  assign_parameters(net, state, load_weights(dir));
  return state;
}

void print_eval(const EvalResult& ev) {
  std::cout << "overall_accuracy " << ev.overall_accuracy << "\n";
  for (std::size_t c = 0; c < ev.per_category_accuracy.size(); ++c) {
    std::cout << kCategories[c] << " ";
    if (ev.per_category_accuracy[c] < 0)
      std::cout << "n/a";
    else
      std::cout << ev.per_category_accuracy[c];
    std::cout << "\n";
  }
  if (ev.skipped) std::cout << "skipped " << ev.skipped << "\n";
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  body(out);
}

// flags > config file > defaults: backfill unset options from the config json
template <typename T>
void backfill(const CLI::App& cmd, const std::string& flag, const json& cfg, const std::string& key, T& value) {
  if (cmd.count(flag) == 0 && cfg.contains(key)) value = cfg.at(key).get<T>();
}

struct TrainArgs {
  std::string arch = "vanilla", data, mode = "rgb", out = ".", pretrained, fusion = "concat", config;
  std::int64_t input_size = 227, iters = 450000, lr_step = 1000, eval_every = 0;
  double lr = 1e-4, lr_factor = 0.1;
  int batch = 1, freeze = 0;
  std::uint64_t seed = 0;
  bool normalize_mean = false;
};

int cmd_train(const TrainArgs& a) {
  TrainingConfig cfg;
  cfg.base_lr = a.lr;
  cfg.lr_decay_factor = a.lr_factor;
  cfg.lr_step = a.lr_step;
  cfg.max_iterations = a.iters;
  cfg.batch_size = a.batch;
  cfg.seed = a.seed;
  cfg.eval_every = a.eval_every;
  cfg.freeze_k = a.freeze;
  cfg.input_mode = a.mode;
  cfg.normalize_mean = a.normalize_mean;
  cfg.validate();

  NetworkSpec net = build_arch(a.arch, a.input_size, a.fusion);
  const InputMode mode = input_mode_from_name(a.mode);
  if (net.input_channels == 6 && mode != InputMode::Branched)
    throw ConfigError("branched architecture requires --mode branched");
  if (net.input_channels == 3 && mode == InputMode::Branched)
    throw ConfigError("--mode branched requires --arch branched");

  DatasetManifest manifest = load_manifest(a.data);
  std::vector<Sample> train_set = load_split(manifest, "train", mode);
  std::vector<Sample> val_set;
  if (cfg.eval_every > 0) val_set = load_split(manifest, "val", mode);

  NetState<float> state;
  if (!a.pretrained.empty()) {
    state = load_pretrained(a.pretrained, pretrained_map(net), net, a.seed).state;
  } else {
    state = init_state<float>(net, a.seed);
  }
  FreezeMask freeze = freeze_stages(net, cfg.freeze_k);

  TensorF mean;
  const TensorF* mean_ptr = nullptr;
  if (cfg.normalize_mean) {
    std::vector<TensorF> crops;
    crops.reserve(train_set.size());
    for (const auto& s : train_set) crops.push_back(center_crop(s.image, net.input_size));
    mean = mean_image(crops);
    save_weights({{"mean", mean}}, (fs::path(a.out) / "mean").string());
    mean_ptr = &mean;
  }

  json resolved = {{"command", "train"},      {"arch", a.arch},
                   {"data", a.data},          {"mode", a.mode},
                   {"out", a.out},            {"pretrained", a.pretrained},
                   {"fusion", a.fusion},      {"input_size", a.input_size},
                   {"iters", cfg.max_iterations}, {"lr", cfg.base_lr},
                   {"lr_factor", cfg.lr_decay_factor}, {"lr_step", cfg.lr_step},
                   {"batch", cfg.batch_size}, {"freeze", cfg.freeze_k},
                   {"seed", cfg.seed},        {"eval_every", cfg.eval_every},
                   {"normalize_mean", cfg.normalize_mean}};
  write_run_json(a.out, resolved);

  TrainResult result =
      train(net, std::move(state), freeze, train_set, val_set.empty() ? nullptr : &val_set, cfg, mean_ptr);

  save_weights(named_parameters(net, result.state), (fs::path(a.out) / "checkpoint").string());
  write_file(fs::path(a.out) / "train_log.csv", [&](std::ostream& os) { result.log.write_csv(os); });
  write_file(fs::path(a.out) / "network.json",
             [&](std::ostream& os) { os << net.to_json().dump(2) << "\n"; });
  std::cout << "trained " << cfg.max_iterations << " iterations; final loss " << result.log.entries.back().loss
            << "\n";
  return 0;
}

struct EvalArgs {
  std::string arch = "vanilla", data, mode = "rgb", out = ".", checkpoint, split = "test", fusion = "concat",
              mean_dir, config;
  std::int64_t input_size = 227;
};

int cmd_eval(const EvalArgs& a) {
  NetworkSpec net = build_arch(a.arch, a.input_size, a.fusion);
  NetState<float> state = load_checkpoint(net, a.checkpoint);
  DatasetManifest manifest = load_manifest(a.data);
  std::vector<Sample> split = load_split(manifest, a.split, input_mode_from_name(a.mode));

  TensorF mean;
  const TensorF* mean_ptr = nullptr;
  if (!a.mean_dir.empty()) {
    NamedTensors loaded = load_weights(a.mean_dir);
    if (loaded.size() != 1) throw ConfigError("mean directory must hold exactly one tensor");
    mean = loaded.front().second;
    mean_ptr = &mean;
  }

  write_run_json(a.out, {{"command", "eval"},
                         {"arch", a.arch},
                         {"data", a.data},
                         {"mode", a.mode},
                         {"out", a.out},
                         {"checkpoint", a.checkpoint},
                         {"split", a.split},
                         {"fusion", a.fusion},
                         {"mean", a.mean_dir},
                         {"input_size", a.input_size}});

  EvalResult ev = evaluate(net, state, split, a.mode, mean_ptr);
  print_eval(ev);
  write_file(fs::path(a.out) / "confusion.csv",
             [&](std::ostream& os) { write_confusion_csv(confusion(ev.records, net.num_classes), os); });
  write_file(fs::path(a.out) / "predictions.csv", [&](std::ostream& os) { write_predictions_csv(ev.records, os); });
  return 0;
}

struct DecomposeArgs {
  std::string in, out = ".", config;
  double sigma = 12.0, s_floor = 1e-3;
};

int cmd_decompose(const DecomposeArgs& a) {
  TensorF img = load_image_rgb(a.in);
  DecomposeOptions opt;
  opt.sigma = a.sigma;
  opt.s_floor = a.s_floor;
  IntrinsicPair pair = decompose(img, opt);
  const double err = reconstruction_error(img, pair);

  fs::create_directories(a.out);
  const std::string stem = fs::path(a.in).stem().string();
  save_image(pair.shading, (fs::path(a.out) / (stem + ".shading.png")).string());
  save_image(pair.reflectance, (fs::path(a.out) / (stem + ".reflectance.png")).string());
  write_file(fs::path(a.out) / (stem + ".json"), [&](std::ostream& os) {
    os << json{{"sigma", opt.sigma}, {"s_floor", opt.s_floor}, {"max_reconstruction_error", err}}.dump(2) << "\n";
  });
  write_run_json(a.out, {{"command", "decompose"},
                         {"in", a.in},
                         {"out", a.out},
                         {"sigma", opt.sigma},
                         {"s_floor", opt.s_floor}});
  std::cout << "max reconstruction error " << err << "\n";
  return 0;
}

struct DatasetArgs {
  std::string corpus, annotations, out = ".", config;
  std::uint64_t seed = 0;
  int val_per_cat = 200, test_per_cat = 100;
  bool fmd = false;
};

int cmd_dataset_build(const DatasetArgs& a) {
  std::vector<Annotation> ann = read_annotations(a.annotations);
  IngestReport report;
  DatasetManifest manifest = ingest(a.corpus, ann, a.out, &report);
  manifest = a.fmd ? fmd_split(manifest, a.seed) : split_dataset(manifest, a.seed, a.val_per_cat, a.test_per_cat);
  save_manifest(manifest, (fs::path(a.out) / "manifest.jsonl").string());

  json rejected = json::array();
  for (const auto& r : report.rejected) rejected.push_back({{"path", r.path}, {"reason", r.reason}});
  write_file(fs::path(a.out) / "ingest_report.json", [&](std::ostream& os) {
    os << json{{"accepted", manifest.records.size()}, {"rejected", rejected}}.dump(2) << "\n";
  });
  write_run_json(a.out, {{"command", "dataset build"},
                         {"corpus", a.corpus},
                         {"annotations", a.annotations},
                         {"out", a.out},
                         {"seed", a.seed},
                         {"val_per_cat", a.val_per_cat},
                         {"test_per_cat", a.test_per_cat},
                         {"fmd", a.fmd}});
  std::cout << "accepted " << manifest.records.size() << ", rejected " << report.rejected.size() << "\n";
  return 0;
}

struct LmPcaArgs {
  std::string data, out = ".", split = "all", config;
  int patches = 1;
  std::uint64_t seed = 0;
};

int cmd_analyze_lm_pca(const LmPcaArgs& a) {
  DatasetManifest manifest = load_manifest(a.data);
  LMBank bank = lm_bank();
  std::mt19937_64 rng(a.seed);

  std::vector<std::vector<double>> features;
  std::vector<std::string> categories;
  for (const auto& r : manifest.records) {
    if (a.split != "all" && split_name(r.split) != a.split) continue;
    TensorF gray3 = to_grayscale(load_image_rgb(r.image_path));
    for (int p = 0; p < a.patches; ++p) {
      TensorF patch = random_crop(gray3, 60, rng);
      TensorD patch2d({60, 60});
      for (std::int64_t i = 0; i < 3600; ++i) patch2d[i] = static_cast<double>(patch[i]);
      auto feat = patch_features(patch2d, bank);
      features.emplace_back(feat.begin(), feat.end());
      categories.push_back(r.category);
    }
  }

  PCAModel model = pca_fit(features);
  write_run_json(a.out, {{"command", "analyze lm-pca"},
                         {"data", a.data},
                         {"out", a.out},
                         {"split", a.split},
                         {"patches", a.patches},
                         {"seed", a.seed}});
  write_file(fs::path(a.out) / "lm_pca.csv", [&](std::ostream& os) {
    os << "x,y,category\n";
    for (std::size_t i = 0; i < features.size(); ++i) {
      auto p = pca_project(model, features[i]);
      os << p[0] << "," << p[1] << "," << categories[i] << "\n";
    }
  });
  std::cout << "projected " << features.size() << " patches; explained variance " << model.explained_variance[0]
            << " " << model.explained_variance[1] << "\n";
  return 0;
}

std::vector<PredictionRecord> read_predictions_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions: " + path);
  return read_predictions_csv(in);
}

int cmd_analyze_confusion(const std::string& predictions, const std::string& out) {
  auto recs = read_predictions_file(predictions);
  write_run_json(out, {{"command", "analyze confusion"}, {"predictions", predictions}, {"out", out}});
  write_file(fs::path(out) / "confusion.csv",
             [&](std::ostream& os) { write_confusion_csv(confusion(recs), os); });
  return 0;
}

int cmd_analyze_confidence(const std::string& predictions, const std::string& out) {
  auto recs = read_predictions_file(predictions);
  write_run_json(out, {{"command", "analyze confidence"}, {"predictions", predictions}, {"out", out}});
  write_file(fs::path(out) / "confidence.csv",
             [&](std::ostream& os) { write_confidence_csv(confidence_stats(recs), os); });
  return 0;
}

int cmd_analyze_errors(const std::string& predictions, const std::string& out, int top) {
  auto recs = read_predictions_file(predictions);
  write_run_json(out, {{"command", "analyze errors"}, {"predictions", predictions}, {"out", out}, {"top", top}});
  write_file(fs::path(out) / "errors.csv", [&](std::ostream& os) {
    write_predictions_csv(top_misclassifications(recs, static_cast<std::size_t>(top)), os);
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"material classification experiment toolkit"};
  app.require_subcommand(1);

  json cfg;
  try {
    cfg = load_config_json(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  TrainArgs ta;
  CLI::App* train_cmd = app.add_subcommand("train", "train a network");
  train_cmd->add_option("--arch", ta.arch, "vanilla | deep | branched");
  train_cmd->add_option("--data", ta.data, "dataset manifest path")->required();
  train_cmd->add_option("--mode", ta.mode, "rgb | reflectance | shading | branched");
  train_cmd->add_option("--out", ta.out, "output directory");
  train_cmd->add_option("--pretrained", ta.pretrained, "pretrained weight directory");
  train_cmd->add_option("--fusion", ta.fusion, "concat | sum (branched only)");
  train_cmd->add_option("--input-size", ta.input_size);
  train_cmd->add_option("--iters", ta.iters);
  train_cmd->add_option("--lr", ta.lr);
  train_cmd->add_option("--lr-factor", ta.lr_factor);
  train_cmd->add_option("--lr-step", ta.lr_step);
  train_cmd->add_option("--batch", ta.batch);
  train_cmd->add_option("--freeze", ta.freeze);
  train_cmd->add_option("--seed", ta.seed);
  train_cmd->add_option("--eval-every", ta.eval_every);
  train_cmd->add_flag("--normalize-mean", ta.normalize_mean);
  train_cmd->add_option("--config", ta.config, "JSON config file");

  EvalArgs ea;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--arch", ea.arch);
  eval_cmd->add_option("--data", ea.data)->required();
  eval_cmd->add_option("--checkpoint", ea.checkpoint)->required();
  eval_cmd->add_option("--split", ea.split, "train | val | test | all");
  eval_cmd->add_option("--mode", ea.mode);
  eval_cmd->add_option("--out", ea.out);
  eval_cmd->add_option("--fusion", ea.fusion);
  eval_cmd->add_option("--mean", ea.mean_dir, "mean image directory");
  eval_cmd->add_option("--input-size", ea.input_size);
  eval_cmd->add_option("--config", ea.config, "JSON config file");

  DecomposeArgs da;
  CLI::App* dec_cmd = app.add_subcommand("decompose", "intrinsic image decomposition");
  dec_cmd->add_option("--in", da.in)->required();
  dec_cmd->add_option("--out", da.out);
  dec_cmd->add_option("--sigma", da.sigma);
  dec_cmd->add_option("--s-floor", da.s_floor);
  dec_cmd->add_option("--config", da.config, "JSON config file");

  DatasetArgs dsa;
  CLI::App* ds_cmd = app.add_subcommand("dataset", "dataset tooling");
  CLI::App* ds_build = ds_cmd->add_subcommand("build", "ingest a corpus and split it");
  ds_build->add_option("--corpus", dsa.corpus)->required();
  ds_build->add_option("--annotations", dsa.annotations)->required();
  ds_build->add_option("--out", dsa.out);
  ds_build->add_option("--seed", dsa.seed);
  ds_build->add_option("--val-per-cat", dsa.val_per_cat);
  ds_build->add_option("--test-per-cat", dsa.test_per_cat);
  ds_build->add_flag("--fmd", dsa.fmd, "FMD protocol: 20 test / 80 train per category");
  ds_build->add_option("--config", dsa.config, "JSON config file");
  ds_cmd->require_subcommand(1);

  LmPcaArgs la;
  std::string pred_path, an_out = ".";
  int top_k = 10;
  CLI::App* an_cmd = app.add_subcommand("analyze", "analysis tooling");
  an_cmd->require_subcommand(1);
  CLI::App* an_pca = an_cmd->add_subcommand("lm-pca", "filter-bank PCA scatter");
  an_pca->add_option("--data", la.data)->required();
  an_pca->add_option("--out", la.out);
  an_pca->add_option("--split", la.split);
  an_pca->add_option("--patches", la.patches);
  an_pca->add_option("--seed", la.seed);
  an_pca->add_option("--config", la.config, "JSON config file");
  CLI::App* an_conf = an_cmd->add_subcommand("confusion", "confusion matrix from predictions");
  an_conf->add_option("--predictions", pred_path)->required();
  an_conf->add_option("--out", an_out);
  CLI::App* an_cstat = an_cmd->add_subcommand("confidence", "confidence statistics from predictions");
  an_cstat->add_option("--predictions", pred_path)->required();
  an_cstat->add_option("--out", an_out);
  CLI::App* an_err = an_cmd->add_subcommand("errors", "highest-confidence misclassifications");
  an_err->add_option("--predictions", pred_path)->required();
  an_err->add_option("--out", an_out);
  an_err->add_option("--top", top_k, "number of errors to report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train_cmd) {
      backfill(*train_cmd, "--arch", cfg, "arch", ta.arch);
      backfill(*train_cmd, "--mode", cfg, "mode", ta.mode);
      backfill(*train_cmd, "--out", cfg, "out", ta.out);
      backfill(*train_cmd, "--pretrained", cfg, "pretrained", ta.pretrained);
      backfill(*train_cmd, "--fusion", cfg, "fusion", ta.fusion);
      backfill(*train_cmd, "--input-size", cfg, "input_size", ta.input_size);
      backfill(*train_cmd, "--iters", cfg, "iters", ta.iters);
      backfill(*train_cmd, "--lr", cfg, "lr", ta.lr);
      backfill(*train_cmd, "--lr-factor", cfg, "lr_factor", ta.lr_factor);
      backfill(*train_cmd, "--lr-step", cfg, "lr_step", ta.lr_step);
      backfill(*train_cmd, "--batch", cfg, "batch", ta.batch);
      backfill(*train_cmd, "--freeze", cfg, "freeze", ta.freeze);
      backfill(*train_cmd, "--seed", cfg, "seed", ta.seed);
      backfill(*train_cmd, "--eval-every", cfg, "eval_every", ta.eval_every);
      backfill(*train_cmd, "--normalize-mean", cfg, "normalize_mean", ta.normalize_mean);
      return cmd_train(ta);
    }
    if (*eval_cmd) {
      backfill(*eval_cmd, "--arch", cfg, "arch", ea.arch);
      backfill(*eval_cmd, "--split", cfg, "split", ea.split);
      backfill(*eval_cmd, "--mode", cfg, "mode", ea.mode);
      backfill(*eval_cmd, "--out", cfg, "out", ea.out);
      backfill(*eval_cmd, "--fusion", cfg, "fusion", ea.fusion);
      backfill(*eval_cmd, "--mean", cfg, "mean", ea.mean_dir);
      backfill(*eval_cmd, "--input-size", cfg, "input_size", ea.input_size);
      return cmd_eval(ea);
    }
    if (*dec_cmd) {
      backfill(*dec_cmd, "--out", cfg, "out", da.out);
      backfill(*dec_cmd, "--sigma", cfg, "sigma", da.sigma);
      backfill(*dec_cmd, "--s-floor", cfg, "s_floor", da.s_floor);
      return cmd_decompose(da);
    }
    if (*ds_cmd) {
      backfill(*ds_build, "--out", cfg, "out", dsa.out);
      backfill(*ds_build, "--seed", cfg, "seed", dsa.seed);
      backfill(*ds_build, "--val-per-cat", cfg, "val_per_cat", dsa.val_per_cat);
      backfill(*ds_build, "--test-per-cat", cfg, "test_per_cat", dsa.test_per_cat);
      backfill(*ds_build, "--fmd", cfg, "fmd", dsa.fmd);
      return cmd_dataset_build(dsa);
    }
    if (*an_cmd) {
      if (*an_pca) {
        backfill(*an_pca, "--out", cfg, "out", la.out);
        backfill(*an_pca, "--split", cfg, "split", la.split);
        backfill(*an_pca, "--patches", cfg, "patches", la.patches);
        backfill(*an_pca, "--seed", cfg, "seed", la.seed);
        return cmd_analyze_lm_pca(la);
      }
      if (*an_conf) return cmd_analyze_confusion(pred_path, an_out);
      if (*an_cstat) return cmd_analyze_confidence(pred_path, an_out);
      if (*an_err) return cmd_analyze_errors(pred_path, an_out, top_k);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
