#include "sfd/vesselness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sfd/nn_ops.hpp"

namespace sfd {

void VesselnessConfig::validate() const {
  if (sigmas.empty()) throw std::invalid_argument("VesselnessConfig: sigmas must be nonempty");
  for (double s : sigmas) {
    if (s <= 0) throw std::invalid_argument("VesselnessConfig: sigmas must be positive");
  }
  if (beta <= 0) throw std::invalid_argument("VesselnessConfig: beta must be positive");
  if (!c_auto && c <= 0) throw std::invalid_argument("VesselnessConfig: c must be positive");
}

static long reflect(long i, long n) {
  // Reflect without repeating the edge sample twice in a row beyond bounds.
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i = std::labs(i) % period;
  return i < n ? i : period - i;
}

// Horizontal then vertical pass with an arbitrary odd 1-D kernel.
static Tensor separable_filter(const Tensor& image, const std::vector<double>& kx,
                               const std::vector<double>& ky) {
  const long H = static_cast<long>(image.dim(0)), W = static_cast<long>(image.dim(1));
  const long rx = static_cast<long>(kx.size()) / 2, ry = static_cast<long>(ky.size()) / 2;
  Tensor tmp({image.dim(0), image.dim(1)});
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      double acc = 0.0;
      for (long j = -rx; j <= rx; ++j) {
        acc += image.at(static_cast<std::size_t>(y),
                        static_cast<std::size_t>(reflect(x + j, W))) *
               kx[static_cast<std::size_t>(j + rx)];
      }
      tmp.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
    }
  }
  Tensor out({image.dim(0), image.dim(1)});
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      double acc = 0.0;
      for (long j = -ry; j <= ry; ++j) {
        acc += tmp.at(static_cast<std::size_t>(reflect(y + j, H)),
                      static_cast<std::size_t>(x)) *
               ky[static_cast<std::size_t>(j + ry)];
      }
      out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
    }
  }
  return out;
}

Tensor gaussian_smooth(const Tensor& image, double sigma) {
  if (image.rank() != 2) throw std::invalid_argument("gaussian_smooth: image must be [H,W]");
  if (sigma <= 0) throw std::invalid_argument("gaussian_smooth: sigma must be positive");
  const long r = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (long i = -r; i <= r; ++i) {
    const double v = std::exp(-(static_cast<double>(i * i)) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return separable_filter(image, k, k);
}

// Standard 3x3 Sobel: derivative [-1,0,1] along one axis, smoothing [1,2,1]
// along the other.
static Tensor sobel_x(const Tensor& image) {
  return separable_filter(image, {-1.0, 0.0, 1.0}, {1.0, 2.0, 1.0});
}
static Tensor sobel_y(const Tensor& image) {
  return separable_filter(image, {1.0, 2.0, 1.0}, {-1.0, 0.0, 1.0});
}

HessianMaps hessian(const Tensor& image) {
  if (image.rank() != 2) throw std::invalid_argument("hessian: image must be [H,W]");
  if (image.dim(0) < 3 || image.dim(1) < 3) {
    throw std::invalid_argument("hessian: image must be at least 3x3");
  }
  HessianMaps h;
  const Tensor dx = sobel_x(image);
  const Tensor dy = sobel_y(image);
  h.dxx = sobel_x(dx);
  h.dyy = sobel_y(dy);
  h.dxy = sobel_y(dx);  // commutes with sobel_x(dy)
  return h;
}

void hessian_eigenvalues(const HessianMaps& h, double eps_eig, Tensor& lambda1,
                         Tensor& lambda2) {
  if (!h.dxx.same_shape(h.dxy) || !h.dxx.same_shape(h.dyy)) {
    throw std::invalid_argument("hessian_eigenvalues: shape mismatch");
  }
  lambda1 = Tensor(h.dxx.shape());
  lambda2 = Tensor(h.dxx.shape());
  for (std::size_t i = 0; i < h.dxx.size(); ++i) {
    const double dxx = h.dxx[i], dxy = h.dxy[i], dyy = h.dyy[i];
    const double mid = 0.5 * (dxx + dyy);
    const double root = std::sqrt(0.25 * (dxx - dyy) * (dxx - dyy) + dxy * dxy + eps_eig);
    double a = mid + root, b = mid - root;
    if (std::fabs(a) < std::fabs(b)) std::swap(a, b);
    lambda1[i] = a;  // |lambda1| >= |lambda2|
    lambda2[i] = b;
  }
}

static Tensor vesselness_with_c(const Tensor& lambda1, const Tensor& lambda2,
                                const VesselnessConfig& cfg, double c) {
  Tensor out(lambda1.shape());
  const double two_beta2 = 2.0 * cfg.beta * cfg.beta;
  const double two_c2 = 2.0 * c * c;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double l1 = lambda1[i], l2 = lambda2[i];
    if (l1 > 0) {
      out[i] = 0.0;
      continue;
    }
    const double rb = std::fabs(l2) / (std::fabs(l1) + cfg.eps_ratio);
    const double s2 = l1 * l1 + l2 * l2;
    const double line = std::exp(-(rb * rb) / two_beta2);
    const double strength = two_c2 > 0 ? 1.0 - std::exp(-s2 / two_c2) : (s2 > 0 ? 1.0 : 0.0);
    out[i] = line * strength;
  }
  return out;
}

Tensor vesselness(const Tensor& lambda1, const Tensor& lambda2, const VesselnessConfig& cfg) {
  cfg.validate();
  if (!lambda1.same_shape(lambda2)) {
    throw std::invalid_argument("vesselness: eigenvalue maps must share a shape");
  }
  double c = cfg.c;
  if (cfg.c_auto) {
    double smax = 0.0;
    for (std::size_t i = 0; i < lambda1.size(); ++i) {
      smax = std::max(smax, std::sqrt(lambda1[i] * lambda1[i] + lambda2[i] * lambda2[i]));
    }
    c = 0.5 * smax;
  }
  return vesselness_with_c(lambda1, lambda2, cfg, c);
}

VesselnessField case_forward(const Tensor& image, const VesselnessConfig& cfg) {
  cfg.validate();
  if (image.rank() != 2) throw std::invalid_argument("case_forward: image must be [H,W]");
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (!std::isfinite(image[i])) {
      throw std::invalid_argument("case_forward: image values must be finite");
    }
  }

  // Min-max normalize to [0,1]; invert when vessels are dark.
  Tensor work = image;
  double lo = work[0], hi = work[0];
  for (std::size_t i = 0; i < work.size(); ++i) {
    lo = std::min(lo, work[i]);
    hi = std::max(hi, work[i]);
  }
  const double range = hi - lo;
  for (std::size_t i = 0; i < work.size(); ++i) {
    double v = range > 0 ? (work[i] - lo) / range : 0.0;
    work[i] = cfg.dark_vessels ? 1.0 - v : v;
  }

  VesselnessField field;
  field.fused = Tensor::zeros(image.shape());
  for (double sigma : cfg.sigmas) {
    const Tensor smoothed = gaussian_smooth(work, sigma);
    const HessianMaps h = hessian(smoothed);
    hessian_eigenvalues(h, cfg.eps_eig, field.eig1, field.eig2);
    Tensor resp = vesselness(field.eig1, field.eig2, cfg);
    for (std::size_t i = 0; i < resp.size(); ++i) {
      field.fused[i] = std::max(field.fused[i], resp[i]);
    }
    field.per_scale.push_back(std::move(resp));
  }
  return field;
}

Tensor channel_attention(const Tensor& features, const Tensor& w1, const Tensor& w2) {
  if (features.rank() != 4) {
    throw std::invalid_argument("channel_attention: features must be [B,C,H,W]");
  }
  const std::size_t B = features.dim(0), C = features.dim(1);
  const std::size_t HW = features.dim(2) * features.dim(3);
  if (w1.rank() != 2 || w1.dim(1) != C || w2.rank() != 2 || w2.dim(0) != C ||
      w2.dim(1) != w1.dim(0)) {
    throw std::invalid_argument("channel_attention: weight shapes inconsistent with C");
  }
  const std::size_t Ch = w1.dim(0);

  Tensor out = features;
  std::vector<double> gap(C), hidden(Ch), scale(C);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* p = features.data() + (b * C + c) * HW;
      double acc = 0.0;
      for (std::size_t i = 0; i < HW; ++i) acc += p[i];
      gap[c] = acc / static_cast<double>(HW);
    }
    for (std::size_t h = 0; h < Ch; ++h) {
      double acc = 0.0;
      for (std::size_t c = 0; c < C; ++c) acc += w1.at(h, c) * gap[c];
      hidden[h] = std::max(acc, 0.0);  // relu
    }
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (std::size_t h = 0; h < Ch; ++h) acc += w2.at(c, h) * hidden[h];
      scale[c] = sigmoid(acc);
    }
    for (std::size_t c = 0; c < C; ++c) {
      double* p = out.data() + (b * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) p[i] *= scale[c];
    }
  }
  return out;
}

}  // namespace sfd
