#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "matforge/analysis.hpp"
#include "matforge/network.hpp"
#include "matforge/tensor.hpp"

namespace matforge {

struct TrainingConfig {
  double base_lr = 1e-4;
  double lr_decay_factor = 0.1;
  std::int64_t lr_step = 1000;
  std::int64_t max_iterations = 450000;
  int batch_size = 1;
  std::uint64_t seed = 0;
  std::int64_t eval_every = 0;       // 0 = no validation passes
  int freeze_k = 0;
  std::string input_mode = "rgb";    // rgb | reflectance | shading | branched
  bool normalize_mean = false;
  double adagrad_epsilon = 1e-8;

  void validate() const {
    if (base_lr <= 0) throw ConfigError("base_lr must be positive");
    if (lr_decay_factor <= 0 || lr_decay_factor > 1) throw ConfigError("lr_decay_factor must be in (0,1]");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (lr_step < 1) throw ConfigError("lr_step must be >= 1");
  }
};

// eta * factor^floor(iter / lr_step)
double lr_at(std::int64_t iter, const TrainingConfig& cfg);

// accum += grad^2; param -= lr * grad / (sqrt(accum) + eps)
template <typename T>
void adagrad_step(Tensor<T>& param, const Tensor<T>& grad, Tensor<T>& accum, double lr, double eps) {
  if (!param.same_shape(grad) || !param.same_shape(accum)) throw ConfigError("adagrad_step: shape mismatch");
  for (std::int64_t i = 0; i < param.numel(); ++i) {
    const double g = static_cast<double>(grad[i]);
    if (!std::isfinite(g)) throw TrainingError("adagrad_step: non-finite gradient");
    const double a = static_cast<double>(accum[i]) + g * g;
    accum[i] = static_cast<T>(a);
    param[i] = static_cast<T>(static_cast<double>(param[i]) - lr * g / (std::sqrt(a) + eps));
  }
}

struct Sample {
  std::string id;
  TensorF image;  // (C, H, W), values on the normalized [0,1] scale (pre mean subtraction)
  int label = 0;
};

struct TrainLogEntry {
  std::int64_t iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::optional<double> val_accuracy;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  void write_csv(std::ostream& os) const;
};

struct AdaGradNetState {
  NetState<float> accum;  // aligned with the parameter state
  double epsilon = 1e-8;
};

struct TrainResult {
  NetState<float> state;
  AdaGradNetState adagrad;
  TrainLog log;
};

// Full training loop: sample batch (seeded, uniform with replacement), random
// crop to the net input size, optional mean subtraction, forward, softmax
// loss, backward, AdaGrad update on all non-frozen parameters.
TrainResult train(const NetworkSpec& net, NetState<float> state, const FreezeMask& freeze,
                  const std::vector<Sample>& train_set, const std::vector<Sample>* val_set,
                  const TrainingConfig& cfg, const TensorF* mean_image = nullptr);

struct EvalResult {
  double overall_accuracy = 0.0;
  std::vector<double> per_category_accuracy;     // num_classes entries; -1 when the category is absent
  std::vector<std::vector<std::int64_t>> confusion_counts;
  std::vector<PredictionRecord> records;
  int skipped = 0;
};

// One center-crop forward per image, dropout in test mode.
EvalResult evaluate(const NetworkSpec& net, const NetState<float>& state, const std::vector<Sample>& split,
                    const std::string& input_mode, const TensorF* mean_image = nullptr);

}  // namespace matforge
