#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <tuple>
#include <vector>

#include "matforge/tensor.hpp"
#include "matforge/util.hpp"

namespace matforge {

struct ConvParams {
  std::int64_t out_channels = 0;
  std::int64_t kernel_h = 0;
  std::int64_t kernel_w = 0;
  std::int64_t stride = 1;
  std::int64_t pad = 0;
  std::int64_t groups = 1;

  void validate(std::int64_t in_channels) const {
    if (stride < 1 || pad < 0 || groups < 1) throw ConfigError("conv: bad stride/pad/groups");
    if (in_channels % groups != 0) throw ConfigError("conv: in_channels not divisible by groups");
    if (out_channels % groups != 0) throw ConfigError("conv: out_channels not divisible by groups");
  }

  std::int64_t out_extent(std::int64_t in) const {
    std::int64_t padded = in + 2 * pad;
    if (padded < kernel_h && padded < kernel_w) throw ConfigError("conv: kernel larger than padded input");
    return 0;  // unused; see out_h/out_w
  }
  std::int64_t out_h(std::int64_t h) const { return (h + 2 * pad - kernel_h) / stride + 1; }
  std::int64_t out_w(std::int64_t w) const { return (w + 2 * pad - kernel_w) / stride + 1; }
};

struct LrnParams {
  std::int64_t n = 5;      // cross-channel window, odd
  double alpha = 1e-4;
  double beta = 0.75;
  double k = 1.0;
};

enum class Phase { Train, Test };

// Cross-correlation plus per-channel bias. weight shape: (Cout, Cin/groups, kh, kw).
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvParams& p, const Tensor<T>& weight, const Tensor<T>& bias) {
  const auto& s = input.shape();
  if (s.size() != 4) throw ConfigError("conv2d: input must be 4-d");
  const std::int64_t N = s[0], Cin = s[1], H = s[2], W = s[3];
  p.validate(Cin);
  if (weight.dim(0) != p.out_channels || weight.dim(1) != Cin / p.groups || weight.dim(2) != p.kernel_h ||
      weight.dim(3) != p.kernel_w)
    throw ConfigError("conv2d: weight shape " + weight.shape_str() + " inconsistent with params/input");
  if (H + 2 * p.pad < p.kernel_h || W + 2 * p.pad < p.kernel_w) throw ConfigError("conv2d: input too small");
  const std::int64_t Ho = p.out_h(H), Wo = p.out_w(W);
  const std::int64_t cin_g = Cin / p.groups, cout_g = p.out_channels / p.groups;
  Tensor<T> out({N, p.out_channels, Ho, Wo});

  parallel_for(N * p.out_channels, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t nc = lo; nc < hi; ++nc) {
      const std::int64_t n = nc / p.out_channels, co = nc % p.out_channels;
      const std::int64_t g = co / cout_g;
      for (std::int64_t oh = 0; oh < Ho; ++oh) {
        for (std::int64_t ow = 0; ow < Wo; ++ow) {
          double acc = static_cast<double>(bias[co]);
          const std::int64_t h0 = oh * p.stride - p.pad, w0 = ow * p.stride - p.pad;
          for (std::int64_t ci = 0; ci < cin_g; ++ci) {
            const std::int64_t c = g * cin_g + ci;
            for (std::int64_t kh = 0; kh < p.kernel_h; ++kh) {
              const std::int64_t h = h0 + kh;
              if (h < 0 || h >= H) continue;
              for (std::int64_t kw = 0; kw < p.kernel_w; ++kw) {
                const std::int64_t w = w0 + kw;
                if (w < 0 || w >= W) continue;
                acc += static_cast<double>(input.at(n, c, h, w)) *
                       static_cast<double>(weight.at(co, ci, kh, kw));
              }
            }
          }
          out.at(n, co, oh, ow) = static_cast<T>(acc);
        }
      }
    }
  });
  return out;
}

template <typename T>
struct ConvGrads {
  Tensor<T> grad_input;
  Tensor<T> grad_weight;
  Tensor<T> grad_bias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input, const ConvParams& p,
                             const Tensor<T>& weight) {
  if (input.empty()) throw StateError("conv2d_backward: missing cached forward input");
  const auto& s = input.shape();
  const std::int64_t N = s[0], Cin = s[1], H = s[2], W = s[3];
  const std::int64_t Ho = p.out_h(H), Wo = p.out_w(W);
  if (grad_out.dim(0) != N || grad_out.dim(1) != p.out_channels || grad_out.dim(2) != Ho || grad_out.dim(3) != Wo)
    throw ConfigError("conv2d_backward: grad_out shape mismatch");
  const std::int64_t cin_g = Cin / p.groups, cout_g = p.out_channels / p.groups;

  ConvGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weight.shape()), Tensor<T>({p.out_channels})};

  // grad w.r.t. input: each input channel written by one worker.
  parallel_for(N * Cin, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t nc = lo; nc < hi; ++nc) {
      const std::int64_t n = nc / Cin, c = nc % Cin;
      const std::int64_t grp = c / cin_g, ci = c % cin_g;
      for (std::int64_t oh = 0; oh < Ho; ++oh) {
        for (std::int64_t ow = 0; ow < Wo; ++ow) {
          const std::int64_t h0 = oh * p.stride - p.pad, w0 = ow * p.stride - p.pad;
          for (std::int64_t cg = 0; cg < cout_g; ++cg) {
            const std::int64_t co = grp * cout_g + cg;
            const double go = static_cast<double>(grad_out.at(n, co, oh, ow));
            if (go == 0.0) continue;
            for (std::int64_t kh = 0; kh < p.kernel_h; ++kh) {
              const std::int64_t h = h0 + kh;
              if (h < 0 || h >= H) continue;
              for (std::int64_t kw = 0; kw < p.kernel_w; ++kw) {
                const std::int64_t w = w0 + kw;
                if (w < 0 || w >= W) continue;
                g.grad_input.at(n, c, h, w) += static_cast<T>(go * static_cast<double>(weight.at(co, ci, kh, kw)));
              }
            }
          }
        }
      }
    }
  });

  // grad w.r.t. weight and bias: each output channel written by one worker.
  parallel_for(p.out_channels, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t co = lo; co < hi; ++co) {
      const std::int64_t grp = co / cout_g;
      double gb = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t oh = 0; oh < Ho; ++oh) {
          for (std::int64_t ow = 0; ow < Wo; ++ow) {
            const double go = static_cast<double>(grad_out.at(n, co, oh, ow));
            gb += go;
            if (go == 0.0) continue;
            const std::int64_t h0 = oh * p.stride - p.pad, w0 = ow * p.stride - p.pad;
            for (std::int64_t ci = 0; ci < cin_g; ++ci) {
              const std::int64_t c = grp * cin_g + ci;
              for (std::int64_t kh = 0; kh < p.kernel_h; ++kh) {
                const std::int64_t h = h0 + kh;
                if (h < 0 || h >= H) continue;
                for (std::int64_t kw = 0; kw < p.kernel_w; ++kw) {
                  const std::int64_t w = w0 + kw;
                  if (w < 0 || w >= W) continue;
                  g.grad_weight.at(co, ci, kh, kw) += static_cast<T>(go * static_cast<double>(input.at(n, c, h, w)));
                }
              }
            }
          }
        }
      }
      g.grad_bias[co] = static_cast<T>(gb);
    }
  });
  return g;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::int64_t i = 0; i < input.numel(); ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& input) {
  Tensor<T> g(input.shape());
  for (std::int64_t i = 0; i < input.numel(); ++i) g[i] = input[i] > T(0) ? grad_out[i] : T(0);
  return g;
}

template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::int64_t> argmax;  // flat input index per output element; tie = first in scan order
};

template <typename T>
PoolResult<T> maxpool_forward(const Tensor<T>& input, std::int64_t size, std::int64_t stride) {
  const auto& s = input.shape();
  const std::int64_t N = s[0], C = s[1], H = s[2], W = s[3];
  if (size > H || size > W) throw ConfigError("maxpool: window exceeds input");
  const std::int64_t Ho = (H - size) / stride + 1, Wo = (W - size) / stride + 1;
  PoolResult<T> r{Tensor<T>({N, C, Ho, Wo}), std::vector<std::int64_t>(static_cast<std::size_t>(N * C * Ho * Wo))};
  parallel_for(N * C, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t nc = lo; nc < hi; ++nc) {
      const std::int64_t n = nc / C, c = nc % C;
      for (std::int64_t oh = 0; oh < Ho; ++oh) {
        for (std::int64_t ow = 0; ow < Wo; ++ow) {
          T best{};
          std::int64_t best_idx = -1;
          for (std::int64_t kh = 0; kh < size; ++kh) {
            for (std::int64_t kw = 0; kw < size; ++kw) {
              const std::int64_t h = oh * stride + kh, w = ow * stride + kw;
              const T v = input.at(n, c, h, w);
              if (best_idx < 0 || v > best) {
                best = v;
                best_idx = ((n * C + c) * H + h) * W + w;
              }
            }
          }
          r.output.at(n, c, oh, ow) = best;
          r.argmax[static_cast<std::size_t>(((n * C + c) * Ho + oh) * Wo + ow)] = best_idx;
        }
      }
    }
  });
  return r;
}

template <typename T>
Tensor<T> maxpool_backward(const Tensor<T>& grad_out, const std::vector<std::int64_t>& argmax,
                           const std::vector<std::int64_t>& input_shape) {
  Tensor<T> g(input_shape);
  for (std::int64_t i = 0; i < grad_out.numel(); ++i) g[argmax[static_cast<std::size_t>(i)]] += grad_out[i];
  return g;
}

// Cross-channel normalization: b_i = a_i / (k + (alpha/n) * sum_{j in win(i)} a_j^2)^beta.
template <typename T>
Tensor<T> lrn_forward(const Tensor<T>& input, const LrnParams& p) {
  if (p.n % 2 == 0) throw ConfigError("lrn: window must be odd");
  const auto& s = input.shape();
  const std::int64_t N = s[0], C = s[1], H = s[2], W = s[3];
  const std::int64_t half = p.n / 2;
  Tensor<T> out(input.shape());
  parallel_for(N * H, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t nh = lo; nh < hi; ++nh) {
      const std::int64_t n = nh / H, h = nh % H;
      for (std::int64_t w = 0; w < W; ++w) {
        for (std::int64_t c = 0; c < C; ++c) {
          double sum = 0.0;
          const std::int64_t c0 = std::max<std::int64_t>(0, c - half), c1 = std::min(C - 1, c + half);
          for (std::int64_t j = c0; j <= c1; ++j) {
            const double a = static_cast<double>(input.at(n, j, h, w));
            sum += a * a;
          }
          const double denom = std::pow(p.k + (p.alpha / static_cast<double>(p.n)) * sum, p.beta);
          out.at(n, c, h, w) = static_cast<T>(static_cast<double>(input.at(n, c, h, w)) / denom);
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> lrn_backward(const Tensor<T>& grad_out, const Tensor<T>& input, const LrnParams& p) {
  const auto& s = input.shape();
  const std::int64_t N = s[0], C = s[1], H = s[2], W = s[3];
  const std::int64_t half = p.n / 2;
  const double an = p.alpha / static_cast<double>(p.n);
  Tensor<T> g(input.shape());
  parallel_for(N * H, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t nh = lo; nh < hi; ++nh) {
      const std::int64_t n = nh / H, h = nh % H;
      for (std::int64_t w = 0; w < W; ++w) {
        // d b_i / d a_m = delta_im * D_i^(-beta) - 2*beta*an * a_i * a_m * D_i^(-beta-1)
        // for m in window(i), with D_i = k + an * sum a_j^2.
        std::vector<double> denom(static_cast<std::size_t>(C));
        for (std::int64_t i = 0; i < C; ++i) {
          double sum = 0.0;
          const std::int64_t c0 = std::max<std::int64_t>(0, i - half), c1 = std::min(C - 1, i + half);
          for (std::int64_t j = c0; j <= c1; ++j) {
            const double a = static_cast<double>(input.at(n, j, h, w));
            sum += a * a;
          }
          denom[static_cast<std::size_t>(i)] = p.k + an * sum;
        }
        for (std::int64_t m = 0; m < C; ++m) {
          double acc = 0.0;
          const std::int64_t i0 = std::max<std::int64_t>(0, m - half), i1 = std::min(C - 1, m + half);
          const double am = static_cast<double>(input.at(n, m, h, w));
          for (std::int64_t i = i0; i <= i1; ++i) {
            const double D = denom[static_cast<std::size_t>(i)];
            const double go = static_cast<double>(grad_out.at(n, i, h, w));
            const double ai = static_cast<double>(input.at(n, i, h, w));
            double d = -2.0 * p.beta * an * ai * am * std::pow(D, -p.beta - 1.0);
            if (i == m) d += std::pow(D, -p.beta);
            acc += go * d;
          }
          g.at(n, m, h, w) = static_cast<T>(acc);
        }
      }
    }
  });
  return g;
}

// input (N, D) x weight (D, M) + bias (M).
template <typename T>
Tensor<T> fc_forward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (input.rank() != 2) throw ConfigError("fc: input must be 2-d (flatten first)");
  const std::int64_t N = input.dim(0), D = input.dim(1);
  if (weight.dim(0) != D) throw ConfigError("fc: inner dimension mismatch: input D=" + std::to_string(D) +
                                            ", weight " + weight.shape_str());
  const std::int64_t M = weight.dim(1);
  Tensor<T> out({N, M});
  parallel_for(N, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t n = lo; n < hi; ++n) {
      T* orow = out.data() + n * M;
      for (std::int64_t m = 0; m < M; ++m) orow[m] = bias[m];
      const T* irow = input.data() + n * D;
      for (std::int64_t d = 0; d < D; ++d) {
        const T x = irow[d];
        if (x == T(0)) continue;
        const T* wrow = weight.data() + d * M;
        for (std::int64_t m = 0; m < M; ++m) orow[m] += x * wrow[m];
      }
    }
  });
  return out;
}

template <typename T>
struct FcGrads {
  Tensor<T> grad_input;
  Tensor<T> grad_weight;
  Tensor<T> grad_bias;
};

template <typename T>
FcGrads<T> fc_backward(const Tensor<T>& grad_out, const Tensor<T>& input, const Tensor<T>& weight) {
  const std::int64_t N = input.dim(0), D = input.dim(1), M = weight.dim(1);
  FcGrads<T> g{Tensor<T>({N, D}), Tensor<T>({D, M}), Tensor<T>({M})};
  parallel_for(N, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t n = lo; n < hi; ++n) {
      const T* grow = grad_out.data() + n * M;
      T* girow = g.grad_input.data() + n * D;
      for (std::int64_t d = 0; d < D; ++d) {
        const T* wrow = weight.data() + d * M;
        double acc = 0.0;
        for (std::int64_t m = 0; m < M; ++m) acc += static_cast<double>(grow[m]) * static_cast<double>(wrow[m]);
        girow[d] = static_cast<T>(acc);
      }
    }
  });
  parallel_for(D, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t d = lo; d < hi; ++d) {
      T* gwrow = g.grad_weight.data() + d * M;
      for (std::int64_t n = 0; n < N; ++n) {
        const T x = input[n * D + d];
        if (x == T(0)) continue;
        const T* grow = grad_out.data() + n * M;
        for (std::int64_t m = 0; m < M; ++m) gwrow[m] += x * grow[m];
      }
    }
  });
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t m = 0; m < M; ++m) g.grad_bias[m] += grad_out[n * M + m];
  return g;
}

// Inverted dropout: survivors scaled by 1/(1-ratio) at train time, test mode is identity.
// Mask entries are 0 or 1/(1-ratio).
template <typename T>
struct DropoutResult {
  Tensor<T> output;
  Tensor<T> mask;
};

template <typename T>
DropoutResult<T> dropout_forward(const Tensor<T>& input, double ratio, Phase phase, std::mt19937_64& rng) {
  if (ratio < 0.0 || ratio >= 1.0) throw ConfigError("dropout: ratio must be in [0,1)");
  if (phase == Phase::Test || ratio == 0.0) {
    Tensor<T> mask(input.shape());
    mask.fill(T(1));
    return {input, std::move(mask)};
  }
  const T scale = static_cast<T>(1.0 / (1.0 - ratio));
  Tensor<T> out(input.shape()), mask(input.shape());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::int64_t i = 0; i < input.numel(); ++i) {
    const bool keep = uni(rng) >= ratio;
    mask[i] = keep ? scale : T(0);
    out[i] = input[i] * mask[i];
  }
  return {std::move(out), std::move(mask)};
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out, const Tensor<T>& mask) {
  Tensor<T> g(grad_out.shape());
  for (std::int64_t i = 0; i < grad_out.numel(); ++i) g[i] = grad_out[i] * mask[i];
  return g;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  const std::int64_t N = logits.dim(0), K = logits.dim(1);
  Tensor<T> probs({N, K});
  for (std::int64_t n = 0; n < N; ++n) {
    const T* row = logits.data() + n * K;
    double mx = static_cast<double>(row[0]);
    for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(row[k]));
    double sum = 0.0;
    for (std::int64_t k = 0; k < K; ++k) sum += std::exp(static_cast<double>(row[k]) - mx);
    for (std::int64_t k = 0; k < K; ++k)
      probs[n * K + k] = static_cast<T>(std::exp(static_cast<double>(row[k]) - mx) / sum);
  }
  return probs;
}

template <typename T>
struct SoftmaxLossResult {
  double loss = 0.0;
  Tensor<T> probs;
  Tensor<T> grad_logits;
};

// Mean negative log-likelihood; grad = (probs - onehot) / N.
template <typename T>
SoftmaxLossResult<T> softmax_loss(const Tensor<T>& logits, const std::vector<int>& labels) {
  const std::int64_t N = logits.dim(0), K = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != N) throw ConfigError("softmax_loss: label count mismatch");
  SoftmaxLossResult<T> r;
  r.probs = softmax_rows(logits);
  r.grad_logits = Tensor<T>({N, K});
  double loss = 0.0;
  for (std::int64_t n = 0; n < N; ++n) {
    const int y = labels[static_cast<std::size_t>(n)];
    if (y < 0 || y >= K) throw ConfigError("softmax_loss: label out of range");
    // recompute log-prob stably rather than log(probs)
    const T* row = logits.data() + n * K;
    double mx = static_cast<double>(row[0]);
    for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(row[k]));
    double sum = 0.0;
    for (std::int64_t k = 0; k < K; ++k) sum += std::exp(static_cast<double>(row[k]) - mx);
    loss -= (static_cast<double>(row[y]) - mx - std::log(sum));
    for (std::int64_t k = 0; k < K; ++k) {
      double g = static_cast<double>(r.probs[n * K + k]);
      if (k == y) g -= 1.0;
      r.grad_logits[n * K + k] = static_cast<T>(g / static_cast<double>(N));
    }
  }
  r.loss = loss / static_cast<double>(N);
  return r;
}

}  // namespace matforge
