#include "sfd/nn_ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sfd {

static void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor* bias,
              std::size_t stride, std::size_t padding) {
  require(input.rank() == 4, "conv2d: input must be [B,Cin,H,W]");
  require(kernel.rank() == 4, "conv2d: kernel must be [Cout,Cin,kh,kw]");
  const std::size_t B = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t Cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  require(kernel.dim(1) == Cin, "conv2d: kernel Cin " + std::to_string(kernel.dim(1)) +
                                    " != input channels " + std::to_string(Cin));
  require(kh % 2 == 1 && kw % 2 == 1, "conv2d: kernel extents must be odd");
  require(stride >= 1, "conv2d: stride must be positive");
  require(H + 2 * padding >= kh && W + 2 * padding >= kw,
          "conv2d: padded input smaller than kernel");
  if (bias) require(bias->rank() == 1 && bias->dim(0) == Cout, "conv2d: bad bias shape");

  const std::size_t Ho = (H + 2 * padding - kh) / stride + 1;
  const std::size_t Wo = (W + 2 * padding - kw) / stride + 1;
  Tensor out({B, Cout, Ho, Wo});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t co = 0; co < Cout; ++co) {
      const double bv = bias ? (*bias)[co] : 0.0;
      for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double acc = bv;
          const long y0 = static_cast<long>(oy * stride) - static_cast<long>(padding);
          const long x0 = static_cast<long>(ox * stride) - static_cast<long>(padding);
          for (std::size_t ci = 0; ci < Cin; ++ci) {
            for (std::size_t ky = 0; ky < kh; ++ky) {
              const long iy = y0 + static_cast<long>(ky);
              if (iy < 0 || iy >= static_cast<long>(H)) continue;
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long ix = x0 + static_cast<long>(kx);
                if (ix < 0 || ix >= static_cast<long>(W)) continue;
                acc += input.at(b, ci, static_cast<std::size_t>(iy),
                                static_cast<std::size_t>(ix)) *
                       kernel.at(co, ci, ky, kx);
              }
            }
          }
          out.at(b, co, oy, ox) = acc;
        }
      }
    }
  }
  return out;
}

Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel) {
  require(input.rank() == 4, "depthwise_conv2d: input must be [B,C,H,W]");
  require(kernel.rank() == 4 && kernel.dim(1) == 1,
          "depthwise_conv2d: kernel must be [C,1,kh,kw]");
  const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t kh = kernel.dim(2), kw = kernel.dim(3);
  require(kernel.dim(0) == C, "depthwise_conv2d: kernel channels " +
                                  std::to_string(kernel.dim(0)) + " != input channels " +
                                  std::to_string(C));
  require(kh % 2 == 1 && kw % 2 == 1, "depthwise_conv2d: kernel extents must be odd");
  const long py = static_cast<long>(kh / 2), px = static_cast<long>(kw / 2);

  Tensor out({B, C, H, W});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t oy = 0; oy < H; ++oy) {
        for (std::size_t ox = 0; ox < W; ++ox) {
          double acc = 0.0;
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const long iy = static_cast<long>(oy) + static_cast<long>(ky) - py;
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const long ix = static_cast<long>(ox) + static_cast<long>(kx) - px;
              if (ix < 0 || ix >= static_cast<long>(W)) continue;
              acc += input.at(b, c, static_cast<std::size_t>(iy),
                              static_cast<std::size_t>(ix)) *
                     kernel.at(c, 0, ky, kx);
            }
          }
          out.at(b, c, oy, ox) = acc;
        }
      }
    }
  }
  return out;
}

Tensor conv1d_causal(const Tensor& input, const Tensor& kernel) {
  require(input.rank() == 3, "conv1d_causal: input must be [B,C,L]");
  require(kernel.rank() == 3 && kernel.dim(1) == 1,
          "conv1d_causal: kernel must be [C,1,k]");
  const std::size_t B = input.dim(0), C = input.dim(1), L = input.dim(2);
  const std::size_t k = kernel.dim(2);
  require(kernel.dim(0) == C, "conv1d_causal: channel mismatch");

  // Left-pad by k-1 zeros; output position t sees inputs t-k+1 .. t.
  Tensor out({B, C, L});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t t = 0; t < L; ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          const long src = static_cast<long>(t) - static_cast<long>(k - 1 - j);
          if (src < 0) continue;
          acc += input.at(b, c, static_cast<std::size_t>(src)) * kernel.at(c, 0, j);
        }
        out.at(b, c, t) = acc;
      }
    }
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double silu(double x) { return x * sigmoid(x); }

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

double leaky_relu(double x, double slope) { return x >= 0 ? x : slope * x; }

template <typename F>
static Tensor map(const Tensor& x, F f) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(out[i]);
  return out;
}

Tensor sigmoid(const Tensor& x) { return map(x, [](double v) { return sigmoid(v); }); }
Tensor silu(const Tensor& x) { return map(x, [](double v) { return silu(v); }); }
Tensor softplus(const Tensor& x) { return map(x, [](double v) { return softplus(v); }); }
Tensor leaky_relu(const Tensor& x, double slope) {
  return map(x, [slope](double v) { return leaky_relu(v, slope); });
}

Tensor batch_norm_inference(const Tensor& input, const Tensor& mean, const Tensor& var,
                            const Tensor& gamma, const Tensor& beta, double eps) {
  require(input.rank() == 4, "batch_norm: input must be [B,C,H,W]");
  const std::size_t C = input.dim(1);
  for (const Tensor* t : {&mean, &var, &gamma, &beta}) {
    require(t->rank() == 1 && t->dim(0) == C, "batch_norm: channel-count mismatch");
  }
  for (std::size_t c = 0; c < C; ++c) {
    require(var[c] >= 0.0, "batch_norm: variance must be non-negative");
  }
  Tensor out = input;
  const std::size_t B = input.dim(0), HW = input.dim(2) * input.dim(3);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(var[c] + eps);
      double* p = out.data() + (b * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) p[i] = (p[i] - mean[c]) * inv * gamma[c] + beta[c];
    }
  }
  return out;
}

Tensor rms_norm_gated(const Tensor& y, const Tensor& z, const Tensor& gamma, double eps) {
  require(y.rank() == 3, "rms_norm_gated: y must be [B,L,D]");
  require(y.same_shape(z), "rms_norm_gated: y and z shapes must match");
  const std::size_t D = y.dim(2);
  require(gamma.rank() == 1 && gamma.dim(0) == D, "rms_norm_gated: bad gamma shape");

  Tensor out = y;
  const std::size_t rows = y.dim(0) * y.dim(1);
  for (std::size_t r = 0; r < rows; ++r) {
    double* g = out.data() + r * D;
    const double* zp = z.data() + r * D;
    double ss = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      g[d] *= silu(zp[d]);
      ss += g[d] * g[d];
    }
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(D) + eps);
    for (std::size_t d = 0; d < D; ++d) g[d] *= inv * gamma[d];
  }
  return out;
}

Tensor nearest_upsample(const Tensor& input, std::size_t factor) {
  require(input.rank() == 4, "nearest_upsample: input must be [B,C,H,W]");
  require(factor >= 1, "nearest_upsample: factor must be positive");
  const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  Tensor out({B, C, H * factor, W * factor});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H * factor; ++y)
        for (std::size_t x = 0; x < W * factor; ++x)
          out.at(b, c, y, x) = input.at(b, c, y / factor, x / factor);
  return out;
}

Tensor linear_last(const Tensor& input, const Tensor& w) {
  require(input.rank() == 3, "linear_last: input must be [B,L,Din]");
  require(w.rank() == 2 && w.dim(1) == input.dim(2), "linear_last: weight shape mismatch");
  const std::size_t rows = input.dim(0) * input.dim(1);
  const std::size_t Din = input.dim(2), Dout = w.dim(0);
  Tensor out({input.dim(0), input.dim(1), Dout});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = input.data() + r * Din;
    double* y = out.data() + r * Dout;
    for (std::size_t o = 0; o < Dout; ++o) {
      const double* wr = w.data() + o * Din;
      double acc = 0.0;
      for (std::size_t i = 0; i < Din; ++i) acc += wr[i] * x[i];
      y[o] = acc;
    }
  }
  return out;
}

Tensor linear_channels(const Tensor& input, const Tensor& w) {
  require(input.rank() == 3, "linear_channels: input must be [B,C,L]");
  require(w.rank() == 2 && w.dim(1) == input.dim(1),
          "linear_channels: weight shape mismatch");
  const std::size_t B = input.dim(0), Cin = input.dim(1), L = input.dim(2);
  const std::size_t Cout = w.dim(0);
  Tensor out({B, Cout, L});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < Cout; ++o)
      for (std::size_t t = 0; t < L; ++t) {
        double acc = 0.0;
        for (std::size_t i = 0; i < Cin; ++i) acc += w.at(o, i) * input.at(b, i, t);
        out.at(b, o, t) = acc;
      }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require(a.rank() == 4 && b.rank() == 4, "concat_channels: inputs must be [B,C,H,W]");
  require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
          "concat_channels: non-channel dims must match");
  const std::size_t B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1);
  const std::size_t HW = a.dim(2) * a.dim(3);
  Tensor out({B, Ca + Cb, a.dim(2), a.dim(3)});
  for (std::size_t bi = 0; bi < B; ++bi) {
    for (std::size_t c = 0; c < Ca; ++c)
      for (std::size_t i = 0; i < HW; ++i)
        out.data()[(bi * (Ca + Cb) + c) * HW + i] = a.data()[(bi * Ca + c) * HW + i];
    for (std::size_t c = 0; c < Cb; ++c)
      for (std::size_t i = 0; i < HW; ++i)
        out.data()[(bi * (Ca + Cb) + Ca + c) * HW + i] = b.data()[(bi * Cb + c) * HW + i];
  }
  return out;
}

Tensor flip_length(const Tensor& x) {
  Tensor out = x;
  const std::size_t L = x.dim(x.rank() - 1);
  const std::size_t rows = x.size() / L;
  for (std::size_t r = 0; r < rows; ++r) {
    double* p = out.data() + r * L;
    for (std::size_t i = 0; i < L / 2; ++i) std::swap(p[i], p[L - 1 - i]);
  }
  return out;
}

}  // namespace sfd
