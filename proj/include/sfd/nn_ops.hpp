#pragma once

#include "sfd/tensor.hpp"

namespace sfd {

// Cross-correlation (no kernel flip), zero padding.
// input [B,Cin,H,W], kernel [Cout,Cin,kh,kw], bias [Cout] or empty.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor* bias,
              std::size_t stride, std::size_t padding);

// Per-channel convolution, odd kernel, padding (k-1)/2 so spatial size is kept.
// input [B,C,H,W], kernel [C,1,kh,kw].
Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel);

// Left-padded causal 1-D convolution. input [B,C,L], kernel [C,1,k].
Tensor conv1d_causal(const Tensor& input, const Tensor& kernel);

double sigmoid(double x);
double silu(double x);
double softplus(double x);  // overflow-safe: max(x,0) + log1p(exp(-|x|))
double leaky_relu(double x, double slope = 0.01);

Tensor sigmoid(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.01);

// Inference-mode batch norm over the channel dim of [B,C,H,W].
Tensor batch_norm_inference(const Tensor& input, const Tensor& mean, const Tensor& var,
                            const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Gated RMS norm over the last dim of [B,L,D]: g = y * silu(z),
// out = g / sqrt(mean_D(g^2) + eps) * gamma.
Tensor rms_norm_gated(const Tensor& y, const Tensor& z, const Tensor& gamma,
                      double eps = 1e-6);

Tensor nearest_upsample(const Tensor& input, std::size_t factor);

// out[o] = sum_i w[o,i] * x[i] applied along the channel dim of [B,C,L] or the
// last dim of [B,L,D]; w is [Dout,Din]. Used for the Mamba2 projections.
Tensor linear_last(const Tensor& input, const Tensor& w);     // [B,L,Din] -> [B,L,Dout]
Tensor linear_channels(const Tensor& input, const Tensor& w); // [B,Cin,L] -> [B,Cout,L]

Tensor concat_channels(const Tensor& a, const Tensor& b);  // [B,C1,H,W]+[B,C2,H,W]
Tensor flip_length(const Tensor& x);                       // reverse last dim

}  // namespace sfd
