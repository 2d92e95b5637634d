#pragma once

#include <string>

#include "matforge/tensor.hpp"

namespace matforge {

// Images are (C, H, W) float tensors on the [0,1] scale, C = 1 or 3 (RGB).

TensorF load_image_rgb(const std::string& path);          // throws IoError on decode failure
void save_image(const TensorF& image, const std::string& path);  // 8-bit PNG/JPEG by extension

// Bilinear, aspect-preserving; only shrinks (no-op when min(H,W) <= target).
TensorF resize_min_dim(const TensorF& image, std::int64_t target);

TensorF to_grayscale(const TensorF& image);  // 0.299 R + 0.587 G + 0.114 B

}  // namespace matforge
