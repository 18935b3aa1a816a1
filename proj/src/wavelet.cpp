#include "sfd/wavelet.hpp"

#include <stdexcept>

#include "sfd/nn_ops.hpp"

namespace sfd {

static Tensor replicate_pad_even(const Tensor& x, bool& pad_h, bool& pad_w) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  pad_h = (H % 2) != 0;
  pad_w = (W % 2) != 0;
  if (!pad_h && !pad_w) return x;
  const std::size_t H2 = H + (pad_h ? 1 : 0), W2 = W + (pad_w ? 1 : 0);
  Tensor out({B, C, H2, W2});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H2; ++y)
        for (std::size_t w = 0; w < W2; ++w)
          out.at(b, c, y, w) = x.at(b, c, std::min(y, H - 1), std::min(w, W - 1));
  return out;
}

HaarBands haar_wt(const Tensor& x) {
  if (x.rank() != 4) throw std::invalid_argument("haar_wt: input must be [B,C,H,W]");
  HaarBands bands;
  const Tensor padded = replicate_pad_even(x, bands.pad_h, bands.pad_w);
  const std::size_t B = padded.dim(0), C = padded.dim(1);
  const std::size_t h = padded.dim(2) / 2, w = padded.dim(3) / 2;
  bands.ll = Tensor({B, C, h, w});
  bands.lh = Tensor({B, C, h, w});
  bands.hl = Tensor({B, C, h, w});
  bands.hh = Tensor({B, C, h, w});
  for (std::size_t bi = 0; bi < B; ++bi) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t xw = 0; xw < w; ++xw) {
          const double a = padded.at(bi, c, 2 * y, 2 * xw);
          const double b = padded.at(bi, c, 2 * y, 2 * xw + 1);
          const double cc = padded.at(bi, c, 2 * y + 1, 2 * xw);
          const double d = padded.at(bi, c, 2 * y + 1, 2 * xw + 1);
          bands.ll.at(bi, c, y, xw) = 0.5 * (a + b + cc + d);
          bands.lh.at(bi, c, y, xw) = 0.5 * (a - b + cc - d);
          bands.hl.at(bi, c, y, xw) = 0.5 * (a + b - cc - d);
          bands.hh.at(bi, c, y, xw) = 0.5 * (a - b - cc + d);
        }
      }
    }
  }
  return bands;
}

Tensor haar_iwt(const HaarBands& bands) {
  if (!bands.ll.same_shape(bands.lh) || !bands.ll.same_shape(bands.hl) ||
      !bands.ll.same_shape(bands.hh)) {
    throw std::invalid_argument("haar_iwt: the four sub-bands must share a shape");
  }
  const std::size_t B = bands.ll.dim(0), C = bands.ll.dim(1);
  const std::size_t h = bands.ll.dim(2), w = bands.ll.dim(3);
  Tensor out({B, C, 2 * h, 2 * w});
  for (std::size_t bi = 0; bi < B; ++bi) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t xw = 0; xw < w; ++xw) {
          const double ll = bands.ll.at(bi, c, y, xw);
          const double lh = bands.lh.at(bi, c, y, xw);
          const double hl = bands.hl.at(bi, c, y, xw);
          const double hh = bands.hh.at(bi, c, y, xw);
          out.at(bi, c, 2 * y, 2 * xw) = 0.5 * (ll + lh + hl + hh);
          out.at(bi, c, 2 * y, 2 * xw + 1) = 0.5 * (ll - lh + hl - hh);
          out.at(bi, c, 2 * y + 1, 2 * xw) = 0.5 * (ll + lh - hl - hh);
          out.at(bi, c, 2 * y + 1, 2 * xw + 1) = 0.5 * (ll - lh - hl + hh);
        }
      }
    }
  }
  if (bands.pad_h || bands.pad_w) {
    const std::size_t Hc = 2 * h - (bands.pad_h ? 1 : 0);
    const std::size_t Wc = 2 * w - (bands.pad_w ? 1 : 0);
    Tensor cropped({B, C, Hc, Wc});
    for (std::size_t bi = 0; bi < B; ++bi)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < Hc; ++y)
          for (std::size_t xw = 0; xw < Wc; ++xw)
            cropped.at(bi, c, y, xw) = out.at(bi, c, y, xw);
    return cropped;
  }
  return out;
}

std::size_t phfp_max_depth(std::size_t h, std::size_t w, std::size_t requested) {
  std::size_t depth = 0;
  std::size_t ch = h, cw = w;
  while (depth < requested) {
    const std::size_t nh = (ch + 1) / 2, nw = (cw + 1) / 2;
    if (nh < 4 || nw < 4) break;
    ch = nh;
    cw = nw;
    ++depth;
  }
  return std::max<std::size_t>(depth, 1);
}

WaveletPyramid phfp_decompose(const Tensor& y, std::size_t depth) {
  if (depth < 1) throw std::invalid_argument("phfp_decompose: depth must be >= 1");
  if (y.rank() != 4) throw std::invalid_argument("phfp_decompose: input must be [B,C,H,W]");
  WaveletPyramid pyr;
  Tensor cur = y;
  for (std::size_t j = 0; j < depth; ++j) {
    if (cur.dim(2) < 2 || cur.dim(3) < 2) {
      throw std::invalid_argument("phfp_decompose: depth too deep for spatial size");
    }
    pyr.levels.push_back(haar_wt(cur));
    cur = pyr.levels.back().ll;
  }
  return pyr;
}

Tensor phfp_reconstruct(const WaveletPyramid& pyramid, const PHFPParams& params) {
  const std::size_t n = pyramid.levels.size();
  if (n == 0 || params.levels.size() != n || params.depth != n) {
    throw std::invalid_argument("phfp_reconstruct: pyramid depth must match params depth");
  }
  Tensor recon;  // reconstruction from the next-deeper level
  for (std::size_t j = n; j-- > 0;) {
    const HaarBands& bands = pyramid.levels[j];
    const PHFPParams::LevelKernels& k = params.levels[j];
    HaarBands synth = bands;
    if (j + 1 < n) synth.ll = bands.ll + recon;
    synth.lh = depthwise_conv2d(bands.lh, k.lh);
    synth.hl = depthwise_conv2d(bands.hl, k.hl);
    synth.hh = depthwise_conv2d(bands.hh, k.hh);
    recon = haar_iwt(synth);
  }
  return recon;
}

Tensor phfp_forward(const Tensor& y, const PHFPParams& params) {
  const Tensor recon = phfp_reconstruct(phfp_decompose(y, params.depth), params);
  return depthwise_conv2d(y, params.direct) + recon;
}

static Tensor delta_kernel(std::size_t channels) {
  Tensor k({channels, 1, 5, 5});
  for (std::size_t c = 0; c < channels; ++c) k.at(c, 0, 2, 2) = 1.0;
  return k;
}

PHFPParams phfp_delta_params(std::size_t channels, std::size_t depth) {
  PHFPParams p;
  p.depth = depth;
  for (std::size_t j = 0; j < depth; ++j) {
    p.levels.push_back({delta_kernel(channels), delta_kernel(channels), delta_kernel(channels)});
  }
  p.direct = delta_kernel(channels);
  return p;
}

PHFPParams phfp_random_params(std::size_t channels, std::size_t depth, std::mt19937_64& rng) {
  PHFPParams p;
  p.depth = depth;
  const double s = 0.2;
  for (std::size_t j = 0; j < depth; ++j) {
    p.levels.push_back({random_uniform({channels, 1, 5, 5}, rng, -s, s),
                        random_uniform({channels, 1, 5, 5}, rng, -s, s),
                        random_uniform({channels, 1, 5, 5}, rng, -s, s)});
  }
  p.direct = random_uniform({channels, 1, 5, 5}, rng, -s, s);
  return p;
}

}  // namespace sfd
