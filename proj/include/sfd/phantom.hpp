#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sfd/tensor.hpp"

namespace sfd {

struct BranchStenosis {
  double t0 = 0.5;       // curve parameter of the narrowest point, in (0,1)
  double severity = 0.5; // b in (0,1); programmed minimum radius = r0*(1-b)
  double extent_px = 8.0;  // Gaussian width of the radius dip, in pixels
};

struct Branch {
  // Quadratic Bezier when 3 control points, straight line when 2.
  std::vector<std::array<double, 2>> control;  // (row, col)
  double radius_px = 4.0;
  std::optional<BranchStenosis> stenosis;
};

struct PhantomSpec {
  std::size_t height = 64, width = 64;
  std::vector<Branch> branches;
  double vessel_intensity = 0.25;   // dark vessels on a bright background
  double background_intensity = 0.85;
  double noise_sigma = 0.0;
  double blur_sigma = 0.6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PhantomGtStenosis {
  std::size_t row = 0, col = 0;
  double severity = 0.0;  // the programmed b, exact
};

struct PhantomTruth {
  Tensor mask;  // [H,W] 0/1
  std::vector<std::vector<std::array<double, 2>>> centerlines;  // per branch, (row,col)
  std::vector<std::vector<double>> radius_profiles;             // per branch, r(t) samples
  std::vector<PhantomGtStenosis> stenoses;
};

struct PhantomSample {
  Tensor image;  // [H,W] in [0,1]
  PhantomTruth truth;
};

PhantomSample render_phantom(const PhantomSpec& spec);

// Presets: "tubes" (straight bars, widths 2/3/5/7/9), "bifurcations" (Y
// shapes), "stenoses" (noise-free single-lesion vessels covering all four
// severity bins), "mixed". Deterministic per seed.
std::vector<PhantomSpec> phantom_corpus(const std::string& preset, std::uint64_t seed,
                                        std::size_t count = 32);

}  // namespace sfd
