#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "matforge/tensor.hpp"

namespace matforge {

inline constexpr std::array<const char*, 10> kCategories = {"fabric", "foliage", "glass",   "leather", "metal",
                                                            "paper",  "plastic", "stone",   "water",   "wood"};

int category_index(const std::string& name);  // throws ConfigError on unknown category

enum class Split { Train, Val, Test };

std::string split_name(Split s);
Split split_from_name(const std::string& s);

struct CropRegion {
  std::int64_t x = 0, y = 0, w = 0, h = 0;
};

struct SampleRecord {
  std::string image_path;
  std::string category;
  std::optional<CropRegion> crop_region;
  Split split = Split::Train;
  std::uint64_t content_hash = 0;
};

struct DatasetManifest {
  std::vector<SampleRecord> records;
  std::uint64_t split_seed = 0;
  int val_per_cat = 0;
  int test_per_cat = 0;

  std::vector<std::int64_t> category_counts(Split s) const;
};

struct RejectedFile {
  std::string path;
  std::string reason;  // failing rule
};

struct IngestReport {
  std::vector<RejectedFile> rejected;
};

struct Annotation {
  std::string file;  // relative to the corpus dir
  std::string category;
  std::optional<CropRegion> region;
  std::vector<std::string> flags;
};

std::vector<Annotation> read_annotations(const std::string& path);  // JSON-lines

struct IngestOptions {
  double blank_std_threshold = 1e-3;
  double color_spread_threshold = 0.02;
  double trim_tolerance = 0.02;       // L-inf distance to the border row/column median
  double trim_uniform_fraction = 0.99;
  std::int64_t min_w = 400;
  std::int64_t min_h = 300;
  std::int64_t resize_min_dim = 384;
};

// Filter chain: decode -> exact-duplicate removal (byte hash, lexicographic
// first wins) -> blank check -> color check -> border-stride trim -> min-size
// gate (either orientation) -> region crop -> shrink so the smallest dimension
// is `resize_min_dim` (never upscales). Accepted images are re-encoded under
// out_dir/images/<category>/.
DatasetManifest ingest(const std::string& corpus_dir, const std::vector<Annotation>& annotations,
                       const std::string& out_dir, IngestReport* report, const IngestOptions& opt = {});

// Seeded per-category shuffle; exact val/test quotas, remainder to train.
DatasetManifest split_dataset(const DatasetManifest& manifest, std::uint64_t seed, int val_per_cat = 200,
                              int test_per_cat = 100);

// FMD protocol: 20 test / 80 train per category, no validation.
DatasetManifest fmd_split(const DatasetManifest& manifest, std::uint64_t seed);

void save_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

TensorF random_crop(const TensorF& image, std::int64_t size, std::mt19937_64& rng);
TensorF center_crop(const TensorF& image, std::int64_t size);

// Per-pixel-per-channel mean over same-shape crops.
TensorF mean_image(const std::vector<TensorF>& crops);
TensorF subtract_mean(const TensorF& image, const TensorF& mean);

enum class MaskFillMode { MeanColor, White };

// Replaces pixels where mask == 0 by the image's mean color or by white.
TensorF mask_fill(const TensorF& image, const TensorF& mask, MaskFillMode mode);

}  // namespace matforge
