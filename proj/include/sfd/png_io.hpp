#pragma once

#include <string>

#include "sfd/tensor.hpp"

namespace sfd {

// 8-bit grayscale PNG. write_png_gray expects values in [0,1] on a [H,W]
// tensor (values are clamped, rounded to 0..255). read_png_gray returns [H,W]
// in [0,1]; only 8-bit grayscale, non-interlaced files are accepted.
void write_png_gray(const std::string& path, const Tensor& image);
Tensor read_png_gray(const std::string& path);

// Binary mask helpers: writes 0/255, reads with a 0.5 threshold.
void write_png_mask(const std::string& path, const Tensor& mask);

}  // namespace sfd
