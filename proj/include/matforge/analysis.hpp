#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "matforge/tensor.hpp"

namespace matforge {

// 48 filters on 49x49 support: 36 oriented Gaussian derivatives
// (6 orientations x 3 scales x first/second), 8 LoG, 4 Gaussians.
struct LMBank {
  static constexpr int kSupport = 49;
  static constexpr int kFilters = 48;
  std::vector<TensorD> filters;  // each (49, 49), L1-normalized; derivative/LoG filters zero-mean
};

LMBank lm_bank();

// Mean absolute response of every filter over the valid region of a 60x60
// grayscale patch.
std::array<double, LMBank::kFilters> patch_features(const TensorD& patch, const LMBank& bank);

struct PCAModel {
  std::vector<double> mean;                 // dimension d
  std::vector<std::vector<double>> components;  // 2 rows, each of dimension d, orthonormal
  std::array<double, 2> explained_variance{};
};

PCAModel pca_fit(const std::vector<std::vector<double>>& features);
std::array<double, 2> pca_project(const PCAModel& model, const std::vector<double>& v);

struct PredictionRecord {
  std::string sample_id;
  int true_category = 0;
  int predicted_category = 0;
  double confidence = 0.0;  // max softmax probability
  std::string input_mode;
};

struct ConfusionMatrix {
  std::vector<std::vector<double>> rows;        // row-stochastic where the count is nonzero
  std::vector<std::int64_t> per_category_count;
};

ConfusionMatrix confusion(const std::vector<PredictionRecord>& records, int num_classes = 10);

struct ConfidenceGroup {
  std::optional<double> mean_conf_correct;
  std::optional<double> mean_conf_wrong;              // grouped by true category
  std::optional<double> mean_conf_predicted_wrongly;  // grouped by predicted category, wrong predictions
};

std::map<int, ConfidenceGroup> confidence_stats(const std::vector<PredictionRecord>& records);

// The k wrong predictions with the largest confidence; ties resolved by sample id.
std::vector<PredictionRecord> top_misclassifications(const std::vector<PredictionRecord>& records, std::size_t k);

void write_confusion_csv(const ConfusionMatrix& m, std::ostream& os);
void write_confidence_csv(const std::map<int, ConfidenceGroup>& stats, std::ostream& os);
void write_predictions_csv(const std::vector<PredictionRecord>& records, std::ostream& os);
std::vector<PredictionRecord> read_predictions_csv(std::istream& is);

}  // namespace matforge
