#pragma once

#include <vector>

#include "sfd/tensor.hpp"

namespace sfd {

struct VesselnessConfig {
  std::vector<double> sigmas{1.0, 2.0, 3.0};
  double beta = 0.5;
  double c = 0.0;           // used when c_auto is false
  bool c_auto = true;       // c = half the per-scale maximum of S
  double eps_eig = 1e-12;   // inside the eigenvalue square root
  double eps_ratio = 1e-12; // in the R_b denominator
  bool dark_vessels = true; // invert intensities before filtering

  void validate() const;
};

struct VesselnessField {
  std::vector<Tensor> per_scale;  // one [H,W] response per sigma, values in [0,1]
  Tensor fused;                   // elementwise max across scales
  Tensor eig1, eig2;              // eigenvalue maps of the last computed scale
};

// Separable Gaussian, truncated at radius ceil(3*sigma), kernel renormalized
// to sum 1, reflect padding at borders. image is [H,W].
Tensor gaussian_smooth(const Tensor& image, double sigma);

// Second derivatives via repeated 3x3 Sobel filtering, reflect padding.
struct HessianMaps {
  Tensor dxx, dxy, dyy;
};
HessianMaps hessian(const Tensor& image);

// Per-pixel eigenvalues of [[Dxx,Dxy],[Dxy,Dyy]], reordered so |l1| >= |l2|.
void hessian_eigenvalues(const HessianMaps& h, double eps_eig, Tensor& lambda1,
                         Tensor& lambda2);

// Frangi-style response. Gate on the large-magnitude eigenvalue: zero where
// lambda1 > 0; otherwise exp(-Rb^2/(2 beta^2)) * (1 - exp(-S^2/(2 c^2))) with
// Rb = |l2|/(|l1|+eps) and S = sqrt(l1^2+l2^2).
Tensor vesselness(const Tensor& lambda1, const Tensor& lambda2, const VesselnessConfig& cfg);

// Full multi-scale pipeline on a single [H,W] image.
VesselnessField case_forward(const Tensor& image, const VesselnessConfig& cfg);

// Squeeze-excitation style channel attention: s = sigmoid(w2 relu(w1 gap(f))),
// output = features scaled channelwise. w1 is [Ch,C], w2 is [C,Ch].
Tensor channel_attention(const Tensor& features, const Tensor& w1, const Tensor& w2);

}  // namespace sfd
