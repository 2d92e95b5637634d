#include "matforge/intrinsics.hpp"

#include <algorithm>
#include <cmath>

#include "matforge/image.hpp"

namespace matforge {

TensorF gaussian_blur(const TensorF& plane, double sigma) {
  std::vector<std::int64_t> s = plane.shape();
  std::int64_t H, W;
  if (s.size() == 3 && s[0] == 1) {
    H = s[1];
    W = s[2];
  } else if (s.size() == 2) {
    H = s[0];
    W = s[1];
  } else {
    throw ConfigError("gaussian_blur: expects a single-channel plane");
  }
  if (sigma <= 0.0) return plane;

  const std::int64_t radius = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (std::int64_t i = -radius; i <= radius; ++i)
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));

  // separable pass with per-pixel weight renormalization at the borders
  std::vector<double> tmp(static_cast<std::size_t>(H * W));
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      double acc = 0.0, wsum = 0.0;
      for (std::int64_t i = -radius; i <= radius; ++i) {
        const std::int64_t xx = x + i;
        if (xx < 0 || xx >= W) continue;
        const double w = kernel[static_cast<std::size_t>(i + radius)];
        acc += w * static_cast<double>(plane[y * W + xx]);
        wsum += w;
      }
      tmp[static_cast<std::size_t>(y * W + x)] = acc / wsum;
    }
  }
  TensorF out(s);
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      double acc = 0.0, wsum = 0.0;
      for (std::int64_t i = -radius; i <= radius; ++i) {
        const std::int64_t yy = y + i;
        if (yy < 0 || yy >= H) continue;
        const double w = kernel[static_cast<std::size_t>(i + radius)];
        acc += w * tmp[static_cast<std::size_t>(yy * W + x)];
        wsum += w;
      }
      out[y * W + x] = static_cast<float>(acc / wsum);
    }
  }
  return out;
}

IntrinsicPair decompose(const TensorF& image, const DecomposeOptions& opt) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ConfigError("decompose: expects a (3,H,W) image");
  if (!image.all_finite()) throw ConfigError("decompose: non-finite pixels");
  const std::int64_t H = image.dim(1), W = image.dim(2);

  TensorF lum = to_grayscale(image);
  TensorF blurred = gaussian_blur(lum, opt.sigma);

  IntrinsicPair pair;
  pair.shading = TensorF({1, H, W});
  pair.reflectance = TensorF({3, H, W});
  const float floor_v = static_cast<float>(opt.s_floor);
  for (std::int64_t i = 0; i < H * W; ++i) {
    const float sv = std::max(floor_v, blurred[i]);
    pair.shading[i] = sv;
    for (std::int64_t c = 0; c < 3; ++c) pair.reflectance[c * H * W + i] = image[c * H * W + i] / sv;
  }
  return pair;
}

TensorF replicate_shading(const TensorF& shading) {
  if (shading.rank() != 3 || shading.dim(0) != 1) throw ConfigError("replicate_shading: expects (1,H,W)");
  const std::int64_t plane = shading.dim(1) * shading.dim(2);
  TensorF out({3, shading.dim(1), shading.dim(2)});
  for (std::int64_t c = 0; c < 3; ++c) std::copy_n(shading.data(), plane, out.data() + c * plane);
  return out;
}

InputMode input_mode_from_name(const std::string& s) {
  if (s == "rgb") return InputMode::Rgb;
  if (s == "reflectance") return InputMode::Reflectance;
  if (s == "shading") return InputMode::Shading;
  if (s == "branched") return InputMode::Branched;
  throw ConfigError("unknown input mode: " + s);
}

std::string input_mode_name(InputMode m) {
  switch (m) {
    case InputMode::Rgb: return "rgb";
    case InputMode::Reflectance: return "reflectance";
    case InputMode::Shading: return "shading";
    case InputMode::Branched: return "branched";
  }
  throw ConfigError("unknown input mode");
}

TensorF select_input(const TensorF& image, InputMode mode, const DecomposeOptions& opt) {
  if (mode == InputMode::Rgb) return image;
  IntrinsicPair pair = decompose(image, opt);
  if (mode == InputMode::Reflectance) return pair.reflectance;
  if (mode == InputMode::Shading) return replicate_shading(pair.shading);
  // branched: reflectance channels 0..2, replicated shading 3..5
  const std::int64_t H = image.dim(1), W = image.dim(2), plane = H * W;
  TensorF out({6, H, W});
  std::copy_n(pair.reflectance.data(), 3 * plane, out.data());
  for (std::int64_t c = 3; c < 6; ++c) std::copy_n(pair.shading.data(), plane, out.data() + c * plane);
  return out;
}

double reconstruction_error(const TensorF& image, const IntrinsicPair& pair) {
  const std::int64_t plane = image.dim(1) * image.dim(2);
  double mx = 0.0;
  for (std::int64_t c = 0; c < 3; ++c)
    for (std::int64_t i = 0; i < plane; ++i)
      mx = std::max(mx, std::abs(static_cast<double>(image[c * plane + i]) -
                                 static_cast<double>(pair.shading[i]) *
                                     static_cast<double>(pair.reflectance[c * plane + i])));
  return mx;
}

}  // namespace matforge
