#pragma once

#include <array>
#include <cstdint>

#include "sfd/tensor.hpp"
#include "sfd/vesselness.hpp"
#include "sfd/weight_store.hpp"

namespace sfd {

struct NetworkConfig {
  std::array<std::size_t, 5> stage_channels{16, 32, 64, 128, 256};
  std::size_t input_size = 64;  // spatial extent, must be divisible by 16
  VesselnessConfig case_cfg;    // one CASE channel per sigma
  double leaky_slope = 0.01;
  double threshold = 0.5;

  // Bottleneck Mamba2 dimensions (d_inner = n_heads * head_dim = 2*d_model).
  std::size_t mamba_d_model = 32;
  std::size_t mamba_heads = 8;
  std::size_t mamba_head_dim = 8;
  std::size_t mamba_state = 16;
  std::size_t mamba_chunk = 16;
  std::size_t mamba_k_conv = 4;

  std::size_t phfp_depth = 3;       // clamped per stage so the deepest LL is >= 4x4
  std::size_t attn_reduction = 4;

  std::uint64_t seed = 1;  // test-mode random init

  std::size_t case_channels() const { return case_cfg.sigmas.size(); }
  void validate() const;
};

struct SegmentationOutput {
  Tensor prob;  // [B,1,H,W], values in (0,1)
  double threshold = 0.5;
  Tensor mask() const;  // prob >= threshold as 0/1
};

// E = LReLU(BN(Conv3x3(LReLU(BN(Conv3x3(X)))))), stride 1, pad 1. `prefix`
// selects the weight keys, e.g. "enc1" -> enc1.conv1.weight, enc1.bn1.mean, ...
Tensor encoder_block(const Tensor& x, const WeightStore& weights, const std::string& prefix,
                     double leaky_slope);

// LReLU(BN(Conv3x3 stride 2 pad 1)); halves H and W.
Tensor downsample(const Tensor& e, const WeightStore& weights, const std::string& prefix,
                  double leaky_slope);

// U = Conv1x1(upsample(d_next, 2)); Y = concat(U, e_skip); Y = PHFP(Y); CBL pair.
Tensor decoder_stage(const Tensor& d_next, const Tensor& e_skip, const WeightStore& weights,
                     const std::string& prefix, const NetworkConfig& cfg);

// Full forward pass. image is [B,1,H,W] in [0,1].
SegmentationOutput network_forward(const Tensor& image, const WeightStore& weights,
                                   const NetworkConfig& cfg);

double mse_loss(const Tensor& pred, const Tensor& target);

// Seeded random weights covering the full key manifest (BN left neutral).
WeightStore init_network_weights(const NetworkConfig& cfg);

}  // namespace sfd
