#pragma once

#include <string>

#include "matforge/tensor.hpp"

namespace matforge {

// Pixelwise factorization image = shading * reflectance. Shading is a single
// channel in (0,1]; reflectance has three nonnegative channels.
struct IntrinsicPair {
  TensorF shading;      // (1, H, W)
  TensorF reflectance;  // (3, H, W)
};

struct DecomposeOptions {
  double sigma = 12.0;    // Gaussian smoothing of the luminance, pixels
  double s_floor = 1e-3;  // lower bound on shading
};

// Smoothed-luminance retinex split: s = max(s_floor, blur(luminance)),
// R = image / s. Reconstructs the input exactly wherever s was not floored.
IntrinsicPair decompose(const TensorF& image, const DecomposeOptions& opt = {});

TensorF replicate_shading(const TensorF& shading);  // (1,H,W) -> three identical channels

enum class InputMode { Rgb, Reflectance, Shading, Branched };

InputMode input_mode_from_name(const std::string& s);
std::string input_mode_name(InputMode m);

// Chosen representation as a network input: rgb/reflectance are 3 channels,
// shading is replicated to 3, branched stacks reflectance + replicated
// shading into 6 channels.
TensorF select_input(const TensorF& image, InputMode mode, const DecomposeOptions& opt = {});

// Max per-channel |image - s*R|.
double reconstruction_error(const TensorF& image, const IntrinsicPair& pair);

// Gaussian blur with per-pixel kernel renormalization at the borders, so a
// constant image stays exactly constant. Single channel (1,H,W) or (H,W).
TensorF gaussian_blur(const TensorF& plane, double sigma);

}  // namespace matforge
