#include "matforge/image.hpp"

#include <algorithm>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace matforge {

TensorF load_image_rgb(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot decode image: " + path);
  const std::int64_t H = bgr.rows, W = bgr.cols;
  TensorF out({3, H, W});
  for (std::int64_t y = 0; y < H; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(static_cast<int>(y));
    for (std::int64_t x = 0; x < W; ++x) {
      out[0 * H * W + y * W + x] = static_cast<float>(row[x][2]) / 255.0f;
      out[1 * H * W + y * W + x] = static_cast<float>(row[x][1]) / 255.0f;
      out[2 * H * W + y * W + x] = static_cast<float>(row[x][0]) / 255.0f;
    }
  }
  return out;
}

void save_image(const TensorF& image, const std::string& path) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
    throw ConfigError("save_image: expects (1|3,H,W)");
  const std::int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  cv::Mat m(static_cast<int>(H), static_cast<int>(W), C == 3 ? CV_8UC3 : CV_8UC1);
  auto q = [](float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<unsigned char>(std::lround(c * 255.0f));
  };
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      if (C == 3) {
        m.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x)) =
            cv::Vec3b(q(image[2 * H * W + y * W + x]), q(image[1 * H * W + y * W + x]),
                      q(image[0 * H * W + y * W + x]));
      } else {
        m.at<unsigned char>(static_cast<int>(y), static_cast<int>(x)) = q(image[y * W + x]);
      }
    }
  }
  if (!cv::imwrite(path, m)) throw IoError("cannot write image: " + path);
}

TensorF resize_min_dim(const TensorF& image, std::int64_t target) {
  const std::int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const std::int64_t mindim = std::min(H, W);
  if (mindim <= target) return image;
  const double scale = static_cast<double>(target) / static_cast<double>(mindim);
  const std::int64_t Hn = std::max<std::int64_t>(target, static_cast<std::int64_t>(std::lround(H * scale)));
  const std::int64_t Wn = std::max<std::int64_t>(target, static_cast<std::int64_t>(std::lround(W * scale)));

  TensorF out({C, Hn, Wn});
  for (std::int64_t c = 0; c < C; ++c) {
    cv::Mat src(static_cast<int>(H), static_cast<int>(W), CV_32FC1,
                const_cast<float*>(image.data() + c * H * W));
    cv::Mat dst(static_cast<int>(Hn), static_cast<int>(Wn), CV_32FC1, out.data() + c * Hn * Wn);
    cv::resize(src, dst, dst.size(), 0, 0, cv::INTER_LINEAR);
  }
  return out;
}

TensorF to_grayscale(const TensorF& image) {
  if (image.rank() != 3) throw ConfigError("to_grayscale: expects (C,H,W)");
  const std::int64_t H = image.dim(1), W = image.dim(2), plane = H * W;
  if (image.dim(0) == 1) return image;
  TensorF out({1, H, W});
  for (std::int64_t i = 0; i < plane; ++i)
    out[i] = 0.299f * image[i] + 0.587f * image[plane + i] + 0.114f * image[2 * plane + i];
  return out;
}

}  // namespace matforge
