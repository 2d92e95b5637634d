#include "matforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "matforge/image.hpp"
#include "matforge/util.hpp"

namespace fs = std::filesystem;

namespace matforge {

int category_index(const std::string& name) {
  for (std::size_t i = 0; i < kCategories.size(); ++i)
    if (name == kCategories[i]) return static_cast<int>(i);
  throw ConfigError("unknown category: " + name);
}

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  throw ConfigError("bad split");
}

Split split_from_name(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split: " + s);
}

std::vector<std::int64_t> DatasetManifest::category_counts(Split s) const {
  std::vector<std::int64_t> counts(kCategories.size(), 0);
  for (const auto& r : records)
    if (r.split == s) counts[static_cast<std::size_t>(category_index(r.category))]++;
  return counts;
}

std::vector<Annotation> read_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotations: " + path);
  std::vector<Annotation> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    Annotation a;
    a.file = j.at("file").get<std::string>();
    a.category = j.at("category").get<std::string>();
    if (j.contains("region")) {
      const auto& r = j["region"];
      a.region = CropRegion{r.at("x").get<std::int64_t>(), r.at("y").get<std::int64_t>(),
                            r.at("w").get<std::int64_t>(), r.at("h").get<std::int64_t>()};
    }
    if (j.contains("flags")) a.flags = j["flags"].get<std::vector<std::string>>();
    out.push_back(std::move(a));
  }
  return out;
}

namespace {

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  return h;
}

double pixel_stddev(const TensorF& img) {
  double sum = 0.0, sq = 0.0;
  const std::int64_t n = img.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    sum += img[i];
    sq += static_cast<double>(img[i]) * img[i];
  }
  const double mean = sum / static_cast<double>(n);
  return std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
}

double max_channel_spread(const TensorF& img) {
  const std::int64_t plane = img.dim(1) * img.dim(2);
  double mx = 0.0;
  for (std::int64_t i = 0; i < plane; ++i) {
    const float r = img[i], g = img[plane + i], b = img[2 * plane + i];
    mx = std::max(mx, static_cast<double>(std::max({r, g, b}) - std::min({r, g, b})));
  }
  return mx;
}

// A border row/column is removable when >= trim_uniform_fraction of its pixels
// lie within L-inf tolerance of the line's median color.
bool line_uniform(const TensorF& img, bool row, std::int64_t index, std::int64_t lo, std::int64_t hi,
                  const IngestOptions& opt) {
  const std::int64_t H = img.dim(1), W = img.dim(2), plane = H * W;
  const std::int64_t n = hi - lo;
  std::vector<float> vals(static_cast<std::size_t>(n));
  std::array<float, 3> median{};
  for (int c = 0; c < 3; ++c) {
    for (std::int64_t i = lo; i < hi; ++i) {
      const std::int64_t y = row ? index : i, x = row ? i : index;
      vals[static_cast<std::size_t>(i - lo)] = img[c * plane + y * W + x];
    }
    std::nth_element(vals.begin(), vals.begin() + n / 2, vals.end());
    median[static_cast<std::size_t>(c)] = vals[static_cast<std::size_t>(n / 2)];
  }
  std::int64_t ok = 0;
  for (std::int64_t i = lo; i < hi; ++i) {
    const std::int64_t y = row ? index : i, x = row ? i : index;
    double d = 0.0;
    for (int c = 0; c < 3; ++c)
      d = std::max(d, std::abs(static_cast<double>(img[c * plane + y * W + x]) - median[static_cast<std::size_t>(c)]));
    if (d <= opt.trim_tolerance) ++ok;
  }
  return static_cast<double>(ok) >= opt.trim_uniform_fraction * static_cast<double>(n);
}

TensorF crop_image(const TensorF& img, std::int64_t x0, std::int64_t y0, std::int64_t w, std::int64_t h) {
  const std::int64_t H = img.dim(1), W = img.dim(2), plane = H * W;
  TensorF out({img.dim(0), h, w});
  for (std::int64_t c = 0; c < img.dim(0); ++c)
    for (std::int64_t y = 0; y < h; ++y)
      std::copy_n(img.data() + c * plane + (y0 + y) * W + x0, w, out.data() + (c * h + y) * w);
  return out;
}

TensorF trim_border_strides(const TensorF& img, const IngestOptions& opt) {
  std::int64_t top = 0, bottom = img.dim(1), left = 0, right = img.dim(2);
  bool changed = true;
  while (changed && bottom - top > 1 && right - left > 1) {
    changed = false;
    if (line_uniform(img, true, top, left, right, opt) && bottom - top > 1) {
      ++top;
      changed = true;
    }
    if (bottom - top > 1 && line_uniform(img, true, bottom - 1, left, right, opt)) {
      --bottom;
      changed = true;
    }
    if (right - left > 1 && line_uniform(img, false, left, top, bottom, opt)) {
      ++left;
      changed = true;
    }
    if (right - left > 1 && line_uniform(img, false, right - 1, top, bottom, opt)) {
      --right;
      changed = true;
    }
  }
  if (top == 0 && left == 0 && bottom == img.dim(1) && right == img.dim(2)) return img;
  return crop_image(img, left, top, right - left, bottom - top);
}

std::string sanitize_stem(const std::string& rel) {
  std::string s = rel;
  for (char& c : s)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  const auto dot = s.find_last_of('.');
  if (dot != std::string::npos) s.resize(dot);
  return s;
}

}  // namespace

DatasetManifest ingest(const std::string& corpus_dir, const std::vector<Annotation>& annotations,
                       const std::string& out_dir, IngestReport* report, const IngestOptions& opt) {
  DatasetManifest manifest;
  IngestReport local;
  IngestReport& rep = report ? *report : local;

  std::vector<Annotation> sorted = annotations;
  std::sort(sorted.begin(), sorted.end(), [](const Annotation& a, const Annotation& b) { return a.file < b.file; });

  std::set<std::string> annotated;
  for (const auto& a : sorted) annotated.insert(a.file);
  if (fs::exists(corpus_dir)) {
    for (const auto& e : fs::recursive_directory_iterator(corpus_dir)) {
      if (!e.is_regular_file()) continue;
      std::string rel = fs::relative(e.path(), corpus_dir).string();
      if (!annotated.count(rel)) rep.rejected.push_back({rel, "missing annotation"});
    }
  }

  fs::create_directories(fs::path(out_dir) / "images");
  std::set<std::uint64_t> seen_hashes;

  for (const auto& a : sorted) {
    const std::string src = (fs::path(corpus_dir) / a.file).string();
    try {
      category_index(a.category);
    } catch (const ConfigError&) {
      rep.rejected.push_back({a.file, "unknown category"});
      continue;
    }
    if (!fs::exists(src)) {
      rep.rejected.push_back({a.file, "missing file"});
      continue;
    }

    std::uint64_t raw_hash;
    try {
      raw_hash = file_hash(src);
    } catch (const IoError&) {
      rep.rejected.push_back({a.file, "unreadable"});
      continue;
    }
    if (!seen_hashes.insert(raw_hash).second) {
      rep.rejected.push_back({a.file, "duplicate"});
      continue;
    }

    TensorF img;
    try {
      img = load_image_rgb(src);
    } catch (const IoError&) {
      rep.rejected.push_back({a.file, "undecodable"});
      continue;
    }

    if (pixel_stddev(img) < opt.blank_std_threshold) {
      rep.rejected.push_back({a.file, "blank"});
      continue;
    }
    if (max_channel_spread(img) < opt.color_spread_threshold) {
      rep.rejected.push_back({a.file, "grayscale"});
      continue;
    }

    img = trim_border_strides(img, opt);

    const std::int64_t H = img.dim(1), W = img.dim(2);
    const bool big_enough = (W >= opt.min_w && H >= opt.min_h) || (W >= opt.min_h && H >= opt.min_w);
    if (!big_enough) {
      rep.rejected.push_back({a.file, "too small"});
      continue;
    }

    if (a.region) {
      const CropRegion& r = *a.region;
      if (r.x < 0 || r.y < 0 || r.w <= 0 || r.h <= 0 || r.x + r.w > W || r.y + r.h > H) {
        rep.rejected.push_back({a.file, "region out of bounds"});
        continue;
      }
      img = crop_image(img, r.x, r.y, r.w, r.h);
    }

    img = resize_min_dim(img, opt.resize_min_dim);

    const fs::path cat_dir = fs::path(out_dir) / "images" / a.category;
    fs::create_directories(cat_dir);
    const std::string dst = (cat_dir / (sanitize_stem(a.file) + ".png")).string();
    save_image(img, dst);

    SampleRecord rec;
    rec.image_path = dst;
    rec.category = a.category;
    rec.crop_region = a.region;
    rec.split = Split::Train;
    rec.content_hash = file_hash(dst);
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

namespace {

DatasetManifest quota_split(const DatasetManifest& manifest, std::uint64_t seed,
                            const std::vector<std::pair<Split, std::int64_t>>& quotas, bool strict,
                            int val_per_cat, int test_per_cat) {
  DatasetManifest out = manifest;
  out.split_seed = seed;
  out.val_per_cat = val_per_cat;
  out.test_per_cat = test_per_cat;

  std::map<std::string, std::vector<std::size_t>> by_cat;
  for (std::size_t i = 0; i < out.records.size(); ++i) by_cat[out.records[i].category].push_back(i);

  std::int64_t need = 1;
  for (const auto& [s, q] : quotas) need += q;
  for (const char* cat : kCategories) {
    auto it = by_cat.find(cat);
    const std::int64_t have = it == by_cat.end() ? 0 : static_cast<std::int64_t>(it->second.size());
    if (strict && have < need)
      throw ConfigError("split: category '" + std::string(cat) + "' has only " + std::to_string(have) +
                        " samples, need " + std::to_string(need));
  }

  for (auto& [cat, idx] : by_cat) {
    // per-category seed keeps the assignment independent of other categories
    std::mt19937_64 rng(seed ^ fnv1a64(cat.data(), cat.size()));
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t pos = 0;
    for (const auto& [s, q] : quotas) {
      for (std::int64_t j = 0; j < q && pos < idx.size(); ++j, ++pos) out.records[idx[pos]].split = s;
    }
    for (; pos < idx.size(); ++pos) out.records[idx[pos]].split = Split::Train;
  }
  return out;
}

}  // namespace

DatasetManifest split_dataset(const DatasetManifest& manifest, std::uint64_t seed, int val_per_cat,
                              int test_per_cat) {
  return quota_split(manifest, seed, {{Split::Val, val_per_cat}, {Split::Test, test_per_cat}}, true, val_per_cat,
                     test_per_cat);
}

DatasetManifest fmd_split(const DatasetManifest& manifest, std::uint64_t seed) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& r : manifest.records) counts[r.category]++;
  bool standard = true;
  for (const char* cat : kCategories)
    if (counts[cat] != 100) standard = false;

  if (standard) return quota_split(manifest, seed, {{Split::Test, 20}}, false, 0, 20);

  // non-standard layout: proportional quota (20%) per category, with a warning
  DatasetManifest out = manifest;
  out.split_seed = seed;
  std::map<std::string, std::vector<std::size_t>> by_cat;
  for (std::size_t i = 0; i < out.records.size(); ++i) by_cat[out.records[i].category].push_back(i);
  for (auto& [cat, idx] : by_cat) {
    std::mt19937_64 rng(seed ^ fnv1a64(cat.data(), cat.size()));
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t q = idx.size() / 5;
    for (std::size_t pos = 0; pos < idx.size(); ++pos)
      out.records[idx[pos]].split = pos < q ? Split::Test : Split::Train;
  }
  return out;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  nlohmann::json header;
  header["split_seed"] = manifest.split_seed;
  header["val_per_cat"] = manifest.val_per_cat;
  header["test_per_cat"] = manifest.test_per_cat;
  nlohmann::json counts;
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    auto c = manifest.category_counts(s);
    counts[split_name(s)] = c;
  }
  header["counts"] = counts;
  out << header.dump() << "\n";
  for (const auto& r : manifest.records) {
    nlohmann::json j;
    j["image_path"] = r.image_path;
    j["category"] = r.category;
    if (r.crop_region)
      j["crop_region"] = {{"x", r.crop_region->x}, {"y", r.crop_region->y}, {"w", r.crop_region->w},
                          {"h", r.crop_region->h}};
    j["split"] = split_name(r.split);
    j["content_hash"] = r.content_hash;
    out << j.dump() << "\n";
  }
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty manifest: " + path);
  nlohmann::json header = nlohmann::json::parse(line);
  DatasetManifest m;
  m.split_seed = header.value("split_seed", 0ull);
  m.val_per_cat = header.value("val_per_cat", 0);
  m.test_per_cat = header.value("test_per_cat", 0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    SampleRecord r;
    r.image_path = j.at("image_path").get<std::string>();
    r.category = j.at("category").get<std::string>();
    if (j.contains("crop_region")) {
      const auto& c = j["crop_region"];
      r.crop_region = CropRegion{c.at("x").get<std::int64_t>(), c.at("y").get<std::int64_t>(),
                                 c.at("w").get<std::int64_t>(), c.at("h").get<std::int64_t>()};
    }
    r.split = split_from_name(j.at("split").get<std::string>());
    r.content_hash = j.at("content_hash").get<std::uint64_t>();
    m.records.push_back(std::move(r));
  }
  return m;
}

TensorF random_crop(const TensorF& image, std::int64_t size, std::mt19937_64& rng) {
  const std::int64_t H = image.dim(1), W = image.dim(2);
  if (H < size || W < size)
    throw ConfigError("random_crop: image " + image.shape_str() + " smaller than crop " + std::to_string(size));
  if (H == size && W == size) return image;
  std::uniform_int_distribution<std::int64_t> dy(0, H - size), dx(0, W - size);
  const std::int64_t y0 = dy(rng), x0 = dx(rng);
  return crop_image(image, x0, y0, size, size);
}

TensorF center_crop(const TensorF& image, std::int64_t size) {
  const std::int64_t H = image.dim(1), W = image.dim(2);
  if (H < size || W < size)
    throw ConfigError("center_crop: image " + image.shape_str() + " smaller than crop " + std::to_string(size));
  return crop_image(image, (W - size) / 2, (H - size) / 2, size, size);
}

TensorF mean_image(const std::vector<TensorF>& crops) {
  if (crops.empty()) throw ConfigError("mean_image: empty split");
  TensorF mean(crops.front().shape());
  std::vector<double> acc(static_cast<std::size_t>(mean.numel()), 0.0);
  for (const auto& c : crops) {
    if (!c.same_shape(mean)) throw ConfigError("mean_image: crops differ in shape");
    for (std::int64_t i = 0; i < c.numel(); ++i) acc[static_cast<std::size_t>(i)] += c[i];
  }
  for (std::int64_t i = 0; i < mean.numel(); ++i)
    mean[i] = static_cast<float>(acc[static_cast<std::size_t>(i)] / static_cast<double>(crops.size()));
  return mean;
}

TensorF subtract_mean(const TensorF& image, const TensorF& mean) {
  if (!image.same_shape(mean)) throw ConfigError("subtract_mean: shape mismatch");
  TensorF out(image.shape());
  for (std::int64_t i = 0; i < image.numel(); ++i) out[i] = image[i] - mean[i];
  return out;
}

TensorF mask_fill(const TensorF& image, const TensorF& mask, MaskFillMode mode) {
  const std::int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2), plane = H * W;
  if (mask.numel() != plane) throw ConfigError("mask_fill: mask shape mismatch");
  std::vector<float> fill(static_cast<std::size_t>(C), 1.0f);
  if (mode == MaskFillMode::MeanColor) {
    for (std::int64_t c = 0; c < C; ++c) {
      double sum = 0.0;
      for (std::int64_t i = 0; i < plane; ++i) sum += image[c * plane + i];
      fill[static_cast<std::size_t>(c)] = static_cast<float>(sum / static_cast<double>(plane));
    }
  }
  TensorF out = image;
  for (std::int64_t i = 0; i < plane; ++i) {
    if (mask[i] != 0.0f) continue;
    for (std::int64_t c = 0; c < C; ++c) out[c * plane + i] = fill[static_cast<std::size_t>(c)];
  }
  return out;
}

}  // namespace matforge
