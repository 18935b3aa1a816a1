#pragma once

#include <vector>

#include "sfd/tensor.hpp"

namespace sfd {

/// One level of orthonormal Haar sub-bands. pad_h/pad_w record the
/// edge-replication used to reach even input extents, so the inverse can crop.
struct HaarBands {
  Tensor ll, lh, hl, hh;  // each [B,C,ceil(H/2),ceil(W/2)]
  bool pad_h = false;
  bool pad_w = false;
};

// 2x2 stride-2 analysis with the orthonormal Haar kernels. For each block
// [[a,b],[c,d]]: LL=(a+b+c+d)/2, LH=(a-b+c-d)/2, HL=(a+b-c-d)/2, HH=(a-b-c+d)/2.
HaarBands haar_wt(const Tensor& x);

// Exact inverse; crops any recorded replication pad.
Tensor haar_iwt(const HaarBands& bands);

struct WaveletPyramid {
  std::vector<HaarBands> levels;  // level j is haar_wt of level j-1's LL
};

struct PHFPParams {
  std::size_t depth = 3;
  // Per-level depthwise 5x5 kernels for the three detail bands, each [C,1,5,5].
  struct LevelKernels {
    Tensor lh, hl, hh;
  };
  std::vector<LevelKernels> levels;
  Tensor direct;  // depthwise 5x5 kernel for the residual path on the input
};

WaveletPyramid phfp_decompose(const Tensor& y, std::size_t depth);

// Bottom-up synthesis: the next level's reconstruction is added to the LL band
// before inversion; detail bands pass through their depthwise kernels.
Tensor phfp_reconstruct(const WaveletPyramid& pyramid, const PHFPParams& params);

// out = depthwise(direct, y) + reconstruct(decompose(y, depth)).
Tensor phfp_forward(const Tensor& y, const PHFPParams& params);

// Largest usable depth for an HxW input: every level must keep the deepest
// LL at least 4x4.
std::size_t phfp_max_depth(std::size_t h, std::size_t w, std::size_t requested);

// Delta (identity) and seeded-random kernel builders for tests and the
// seeded network weights.
PHFPParams phfp_delta_params(std::size_t channels, std::size_t depth);
PHFPParams phfp_random_params(std::size_t channels, std::size_t depth, std::mt19937_64& rng);

}  // namespace sfd
