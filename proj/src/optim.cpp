#include "matforge/optim.hpp"

#include <cmath>
#include <set>

#include "matforge/dataset.hpp"

namespace matforge {

double lr_at(std::int64_t iter, const TrainingConfig& cfg) {
  if (iter < 0) throw ConfigError("lr_at: negative iteration");
  cfg.validate();
  return cfg.base_lr * std::pow(cfg.lr_decay_factor, static_cast<double>(iter / cfg.lr_step));
}

void TrainLog::write_csv(std::ostream& os) const {
  os << "iteration,lr,loss,val_accuracy\n";
  for (const auto& e : entries) {
    os << e.iteration << "," << e.lr << "," << e.loss << ",";
    if (e.val_accuracy) os << *e.val_accuracy;
    os << "\n";
  }
}

namespace {

TensorF prepare_input(const TensorF& image, std::int64_t size, std::mt19937_64* rng, const TensorF* mean) {
  TensorF crop = rng ? random_crop(image, size, *rng) : center_crop(image, size);
  if (mean) crop = subtract_mean(crop, *mean);
  return crop;
}

TensorF stack(const std::vector<TensorF>& imgs) {
  const auto& s = imgs.front().shape();
  TensorF batch({static_cast<std::int64_t>(imgs.size()), s[0], s[1], s[2]});
  const std::int64_t per = imgs.front().numel();
  for (std::size_t i = 0; i < imgs.size(); ++i)
    std::copy_n(imgs[i].data(), per, batch.data() + static_cast<std::int64_t>(i) * per);
  return batch;
}

}  // namespace

TrainResult train(const NetworkSpec& net, NetState<float> state, const FreezeMask& freeze,
                  const std::vector<Sample>& train_set, const std::vector<Sample>* val_set,
                  const TrainingConfig& cfg, const TensorF* mean_image) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("train: empty training set");
  std::set<int> seen;
  for (const auto& s : train_set) seen.insert(s.label);
  for (int c = 0; c < net.num_classes; ++c)
    if (!seen.count(c))
      throw ConfigError("train: category '" + std::string(c < 10 ? kCategories[static_cast<std::size_t>(c)] : "?") +
                        "' has no training samples");

  TrainResult result;
  result.adagrad.epsilon = cfg.adagrad_epsilon;
  result.adagrad.accum.params.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!state.params[i].weight.empty()) {
      result.adagrad.accum.params[i].weight = TensorF(state.params[i].weight.shape());
      result.adagrad.accum.params[i].bias = TensorF(state.params[i].bias.shape());
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, train_set.size() - 1);

  for (std::int64_t iter = 0; iter < cfg.max_iterations; ++iter) {
    std::vector<TensorF> imgs;
    std::vector<int> labels;
    imgs.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Sample& s = train_set[pick(rng)];
      imgs.push_back(prepare_input(s.image, net.input_size, &rng, mean_image));
      labels.push_back(s.label);
    }
    TensorF batch = stack(imgs);

    ForwardCache<float> cache;
    net_forward(net, state, batch, Phase::Train, rng, &cache);
    auto loss = softmax_loss(cache.logits, labels);
    if (!std::isfinite(loss.loss))
      throw TrainingError("train: non-finite loss at iteration " + std::to_string(iter));

    NetState<float> grads = net_backward(net, state, cache, loss.grad_logits);

    const double lr = lr_at(iter, cfg);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      if (state.params[i].weight.empty()) continue;
      if (freeze.frozen(net.layers[i].stage_index)) continue;
      try {
        adagrad_step(state.params[i].weight, grads.params[i].weight, result.adagrad.accum.params[i].weight, lr,
                     cfg.adagrad_epsilon);
        adagrad_step(state.params[i].bias, grads.params[i].bias, result.adagrad.accum.params[i].bias, lr,
                     cfg.adagrad_epsilon);
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " (iteration " + std::to_string(iter) + ", layer " +
                            net.layers[i].name + ")");
      }
    }

    TrainLogEntry entry{iter, lr, loss.loss, std::nullopt};
    if (val_set && cfg.eval_every > 0 && (iter + 1) % cfg.eval_every == 0) {
      EvalResult ev = evaluate(net, state, *val_set, cfg.input_mode, mean_image);
      entry.val_accuracy = ev.overall_accuracy;
    }
    result.log.entries.push_back(entry);
  }

  result.state = std::move(state);
  return result;
}

EvalResult evaluate(const NetworkSpec& net, const NetState<float>& state, const std::vector<Sample>& split,
                    const std::string& input_mode, const TensorF* mean_image) {
  if (split.empty()) throw ConfigError("evaluate: empty split");
  EvalResult r;
  const int K = net.num_classes;
  r.confusion_counts.assign(static_cast<std::size_t>(K), std::vector<std::int64_t>(static_cast<std::size_t>(K), 0));
  std::mt19937_64 rng(0);  // unused: test phase has no randomness

  for (const Sample& s : split) {
    TensorF crop;
    try {
      crop = prepare_input(s.image, net.input_size, nullptr, mean_image);
    } catch (const std::exception&) {
      ++r.skipped;
      continue;
    }
    TensorF batch = crop.reshaped({1, crop.dim(0), crop.dim(1), crop.dim(2)});
    TensorF probs = net_forward(net, state, batch, Phase::Test, rng);
    int pred = 0;
    double best = static_cast<double>(probs[0]);
    for (int k = 1; k < K; ++k) {
      if (static_cast<double>(probs[k]) > best) {
        best = static_cast<double>(probs[k]);
        pred = k;
      }
    }
    r.confusion_counts[static_cast<std::size_t>(s.label)][static_cast<std::size_t>(pred)]++;
    r.records.push_back(PredictionRecord{s.id, s.label, pred, best, input_mode});
  }

  std::int64_t correct = 0, total = 0;
  r.per_category_accuracy.assign(static_cast<std::size_t>(K), -1.0);
  for (int c = 0; c < K; ++c) {
    std::int64_t row_total = 0;
    for (int k = 0; k < K; ++k) row_total += r.confusion_counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
    if (row_total > 0)
      r.per_category_accuracy[static_cast<std::size_t>(c)] =
          static_cast<double>(r.confusion_counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]) /
          static_cast<double>(row_total);
    correct += r.confusion_counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    total += row_total;
  }
  r.overall_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return r;
}

}  // namespace matforge
