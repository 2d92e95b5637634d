#include "matforge/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

namespace matforge {

namespace {

constexpr int kSup = LMBank::kSupport;
constexpr double kPi = 3.14159265358979323846;

double gauss1d(double sigma, double x, int order) {
  const double var = sigma * sigma;
  double g = std::exp(-x * x / (2.0 * var)) / std::sqrt(2.0 * kPi * var);
  if (order == 1) g *= -x / var;
  if (order == 2) g *= (x * x - var) / (var * var);
  return g;
}

void normalize_zero_mean_l1(TensorD& f) {
  double mean = 0.0;
  for (std::int64_t i = 0; i < f.numel(); ++i) mean += f[i];
  mean /= static_cast<double>(f.numel());
  double l1 = 0.0;
  for (std::int64_t i = 0; i < f.numel(); ++i) {
    f[i] -= mean;
    l1 += std::abs(f[i]);
  }
  for (std::int64_t i = 0; i < f.numel(); ++i) f[i] /= l1;
}

void normalize_l1(TensorD& f) {
  double l1 = 0.0;
  for (std::int64_t i = 0; i < f.numel(); ++i) l1 += std::abs(f[i]);
  for (std::int64_t i = 0; i < f.numel(); ++i) f[i] /= l1;
}

// Oriented derivative of an elongated Gaussian (3:1), derivative along y.
TensorD oriented_filter(double scale, int deriv_order, double angle) {
  TensorD f({kSup, kSup});
  const double c = std::cos(angle), s = std::sin(angle);
  const int half = kSup / 2;
  for (int y = 0; y < kSup; ++y) {
    for (int x = 0; x < kSup; ++x) {
      const double px = static_cast<double>(x - half), py = static_cast<double>(y - half);
      const double rx = c * px - s * py;
      const double ry = s * px + c * py;
      f[y * kSup + x] = gauss1d(3.0 * scale, rx, 0) * gauss1d(scale, ry, deriv_order);
    }
  }
  normalize_zero_mean_l1(f);
  return f;
}

TensorD log_filter(double sigma) {
  TensorD f({kSup, kSup});
  const int half = kSup / 2;
  const double var = sigma * sigma;
  for (int y = 0; y < kSup; ++y) {
    for (int x = 0; x < kSup; ++x) {
      const double px = static_cast<double>(x - half), py = static_cast<double>(y - half);
      const double r2 = px * px + py * py;
      f[y * kSup + x] = (r2 - 2.0 * var) / (var * var) * std::exp(-r2 / (2.0 * var));
    }
  }
  normalize_zero_mean_l1(f);
  return f;
}

TensorD gaussian_filter(double sigma) {
  TensorD f({kSup, kSup});
  const int half = kSup / 2;
  for (int y = 0; y < kSup; ++y) {
    for (int x = 0; x < kSup; ++x) {
      const double px = static_cast<double>(x - half), py = static_cast<double>(y - half);
      f[y * kSup + x] = std::exp(-(px * px + py * py) / (2.0 * sigma * sigma));
    }
  }
  normalize_l1(f);
  return f;
}

}  // namespace

LMBank lm_bank() {
  LMBank bank;
  bank.filters.reserve(LMBank::kFilters);
  const double scales[] = {1.0, std::sqrt(2.0), 2.0};
  const int norient = 6;
  for (int order = 1; order <= 2; ++order)
    for (double sc : scales)
      for (int o = 0; o < norient; ++o)
        bank.filters.push_back(oriented_filter(sc, order, kPi * static_cast<double>(o) / norient));
  const double base[] = {1.0, std::sqrt(2.0), 2.0, 2.0 * std::sqrt(2.0)};
  for (double sc : base) bank.filters.push_back(log_filter(sc));
  for (double sc : base) bank.filters.push_back(log_filter(2.0 * sc));
  for (double sc : base) bank.filters.push_back(gaussian_filter(sc));
  return bank;
}

std::array<double, LMBank::kFilters> patch_features(const TensorD& patch, const LMBank& bank) {
  if (patch.rank() != 2 || patch.dim(0) != 60 || patch.dim(1) != 60)
    throw ConfigError("patch_features: patch must be 60x60");
  const std::int64_t valid = 60 - kSup + 1;
  std::array<double, LMBank::kFilters> feat{};
  for (int k = 0; k < LMBank::kFilters; ++k) {
    const TensorD& f = bank.filters[static_cast<std::size_t>(k)];
    double acc = 0.0;
    for (std::int64_t oy = 0; oy < valid; ++oy) {
      for (std::int64_t ox = 0; ox < valid; ++ox) {
        double r = 0.0;
        for (int fy = 0; fy < kSup; ++fy)
          for (int fx = 0; fx < kSup; ++fx)
            r += patch[(oy + fy) * 60 + ox + fx] * f[fy * kSup + fx];
        acc += std::abs(r);
      }
    }
    feat[static_cast<std::size_t>(k)] = acc / static_cast<double>(valid * valid);
  }
  return feat;
}

PCAModel pca_fit(const std::vector<std::vector<double>>& features) {
  if (features.size() < 3) throw ConfigError("pca_fit: need at least 3 samples");
  const std::size_t d = features.front().size();
  for (const auto& f : features)
    if (f.size() != d) throw ConfigError("pca_fit: inconsistent feature dimensions");

  PCAModel model;
  model.mean.assign(d, 0.0);
  for (const auto& f : features)
    for (std::size_t i = 0; i < d; ++i) model.mean[i] += f[i];
  for (std::size_t i = 0; i < d; ++i) model.mean[i] /= static_cast<double>(features.size());

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (const auto& f : features) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) x[static_cast<Eigen::Index>(i)] = f[i] - model.mean[i];
    cov += x * x.transpose();
  }
  cov /= static_cast<double>(features.size() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw ConfigError("pca_fit: eigendecomposition failed");
  const auto& vals = es.eigenvalues();  // ascending
  const Eigen::Index last = vals.size() - 1;
  const double e1 = vals[last], e2 = vals[last - 1];
  if (e2 <= 1e-12 * std::max(1.0, e1)) throw ConfigError("pca_fit: covariance rank < 2");

  model.explained_variance = {e1, e2};
  model.components.assign(2, std::vector<double>(d));
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd v = es.eigenvectors().col(last - c);
    // deterministic sign: largest-magnitude coordinate positive
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0) v = -v;
    for (std::size_t i = 0; i < d; ++i) model.components[static_cast<std::size_t>(c)][i] = v[static_cast<Eigen::Index>(i)];
  }
  return model;
}

std::array<double, 2> pca_project(const PCAModel& model, const std::vector<double>& v) {
  if (v.size() != model.mean.size()) throw ConfigError("pca_project: dimension mismatch");
  std::array<double, 2> out{0.0, 0.0};
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < v.size(); ++i)
      out[static_cast<std::size_t>(c)] += model.components[static_cast<std::size_t>(c)][i] * (v[i] - model.mean[i]);
  return out;
}

ConfusionMatrix confusion(const std::vector<PredictionRecord>& records, int num_classes) {
  if (records.empty()) throw ConfigError("confusion: no records");
  ConfusionMatrix m;
  m.rows.assign(static_cast<std::size_t>(num_classes), std::vector<double>(static_cast<std::size_t>(num_classes), 0.0));
  m.per_category_count.assign(static_cast<std::size_t>(num_classes), 0);
  for (const auto& r : records) {
    m.rows[static_cast<std::size_t>(r.true_category)][static_cast<std::size_t>(r.predicted_category)] += 1.0;
    m.per_category_count[static_cast<std::size_t>(r.true_category)]++;
  }
  for (int i = 0; i < num_classes; ++i) {
    const auto n = m.per_category_count[static_cast<std::size_t>(i)];
    if (n == 0) continue;
    for (auto& v : m.rows[static_cast<std::size_t>(i)]) v /= static_cast<double>(n);
  }
  return m;
}

std::map<int, ConfidenceGroup> confidence_stats(const std::vector<PredictionRecord>& records) {
  if (records.empty()) throw ConfigError("confidence_stats: no records");
  struct Acc {
    double sum = 0.0;
    std::int64_t n = 0;
  };
  std::map<int, Acc> correct, wrong, wrong_as;
  for (const auto& r : records) {
    if (r.true_category == r.predicted_category) {
      correct[r.true_category].sum += r.confidence;
      correct[r.true_category].n++;
    } else {
      wrong[r.true_category].sum += r.confidence;
      wrong[r.true_category].n++;
      wrong_as[r.predicted_category].sum += r.confidence;
      wrong_as[r.predicted_category].n++;
    }
  }
  std::map<int, ConfidenceGroup> out;
  auto put = [&out](const std::map<int, Acc>& src, auto member) {
    for (const auto& [cat, acc] : src) out[cat].*member = acc.sum / static_cast<double>(acc.n);
  };
  put(correct, &ConfidenceGroup::mean_conf_correct);
  put(wrong, &ConfidenceGroup::mean_conf_wrong);
  put(wrong_as, &ConfidenceGroup::mean_conf_predicted_wrongly);
  return out;
}

std::vector<PredictionRecord> top_misclassifications(const std::vector<PredictionRecord>& records, std::size_t k) {
  std::vector<PredictionRecord> wrong;
  for (const auto& r : records)
    if (r.true_category != r.predicted_category) wrong.push_back(r);
  std::stable_sort(wrong.begin(), wrong.end(), [](const PredictionRecord& a, const PredictionRecord& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.sample_id < b.sample_id;
  });
  if (wrong.size() > k) wrong.resize(k);
  return wrong;
}

void write_confusion_csv(const ConfusionMatrix& m, std::ostream& os) {
  os << "true_category";
  for (std::size_t j = 0; j < m.rows.size(); ++j) os << ",pred_" << j;
  os << ",count\n";
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    os << i;
    for (double v : m.rows[i]) os << "," << v;
    os << "," << m.per_category_count[i] << "\n";
  }
}

void write_confidence_csv(const std::map<int, ConfidenceGroup>& stats, std::ostream& os) {
  os << "category,mean_conf_correct,mean_conf_wrong,mean_conf_predicted_wrongly\n";
  for (const auto& [cat, g] : stats) {
    os << cat << ",";
    if (g.mean_conf_correct) os << *g.mean_conf_correct;
    os << ",";
    if (g.mean_conf_wrong) os << *g.mean_conf_wrong;
    os << ",";
    if (g.mean_conf_predicted_wrongly) os << *g.mean_conf_predicted_wrongly;
    os << "\n";
  }
}

void write_predictions_csv(const std::vector<PredictionRecord>& records, std::ostream& os) {
  os << "sample_id,true_category,predicted_category,confidence,input_mode\n";
  for (const auto& r : records)
    os << r.sample_id << "," << r.true_category << "," << r.predicted_category << "," << r.confidence << ","
       << r.input_mode << "\n";
}

std::vector<PredictionRecord> read_predictions_csv(std::istream& is) {
  std::vector<PredictionRecord> out;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ls(line);
    PredictionRecord r;
    std::string field;
    std::getline(ls, r.sample_id, ',');
    std::getline(ls, field, ',');
    r.true_category = std::stoi(field);
    std::getline(ls, field, ',');
    r.predicted_category = std::stoi(field);
    std::getline(ls, field, ',');
    r.confidence = std::stod(field);
    std::getline(ls, r.input_mode, ',');
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace matforge
