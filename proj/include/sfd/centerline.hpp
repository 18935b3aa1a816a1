#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sfd/tensor.hpp"

namespace sfd {

using PixelCoord = std::pair<std::size_t, std::size_t>;  // (row, col)

struct CenterlineSegment {
  std::vector<PixelCoord> points;      // ordered, 8-connected path
  std::vector<double> diameter_px;     // 2*EDT at each point
  std::vector<double> diameter_mm;
};

struct CenterlineGraph {
  Tensor skeleton;                     // [H,W] 0/1
  Tensor degree;                       // [H,W], 8-neighbor degree on skeleton pixels
  std::vector<CenterlineSegment> segments;
};

// Zhang-Suen iterative thinning to a fixpoint; preserves connectivity and
// leaves a skeleton at most one pixel wide. mask is [H,W] with 0/1 entries.
Tensor skeletonize(const Tensor& mask);

// Exact Euclidean distance (not squared) from each foreground pixel to the
// nearest background pixel; the frame outside the image counts as background.
// Background pixels map to 0.
Tensor euclidean_distance_transform(const Tensor& mask);

// Degree labelling + edge linking. Walks degree-2 chains between
// endpoints/bifurcations; an isolated cycle becomes one segment cut at its
// lexicographically smallest pixel. Diameters are left empty.
CenterlineGraph decompose_segments(const Tensor& skeleton);

// Fills diameter_px (= 2*EDT of the mask) and diameter_mm (via spacing) for
// every segment point. Throws if a skeleton point falls outside the mask.
void diameter_map(CenterlineGraph& graph, const Tensor& mask, double spacing_mm);

}  // namespace sfd
