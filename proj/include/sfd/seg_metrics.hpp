#pragma once

#include <utility>
#include <vector>

#include "sfd/tensor.hpp"

namespace sfd {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

ConfusionCounts confusion(const Tensor& pred_mask, const Tensor& gt_mask);

struct OverlapMetrics {
  double dice = 0.0, acc = 0.0, f1 = 0.0, iou = 0.0, sens = 0.0, spec = 0.0;
  bool sens_defined = false, spec_defined = false;
};

// Dice = 2TP/(2TP+FP+FN); IoU = TP/(TP+FP+FN); F1 from precision/recall
// (equals Dice); both masks empty -> Dice/IoU/F1 = 1 with Sens undefined.
OverlapMetrics overlap_metrics(const ConfusionCounts& c);

// Foreground pixels with at least one background 4-neighbor; the image border
// counts as background.
std::vector<std::pair<std::size_t, std::size_t>> boundary_pixels(const Tensor& mask);

struct SurfaceDistance {
  double value = 0.0;
  bool defined = false;  // false when either boundary set is empty
};

// Symmetric 95th-percentile Hausdorff distance (linear-interpolated
// percentile of each directed distance set, max of the two).
SurfaceDistance hd95(const std::vector<std::pair<std::size_t, std::size_t>>& a,
                     const std::vector<std::pair<std::size_t, std::size_t>>& b);

// Average symmetric surface distance: (sum of directed min-distances both
// ways) / (|A| + |B|).
SurfaceDistance assd(const std::vector<std::pair<std::size_t, std::size_t>>& a,
                     const std::vector<std::pair<std::size_t, std::size_t>>& b);

// Linear-interpolated percentile (q in [0,100]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

}  // namespace sfd
