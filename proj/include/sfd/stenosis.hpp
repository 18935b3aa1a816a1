#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sfd/centerline.hpp"

namespace sfd {

struct DetectionConfig {
  double radius_px = 10.0;     // match radius against ground truth
  std::size_t length_thresh = 20;  // minimum segment point count
  double diameter_thresh_mm = 1.8; // skip segments thinner than this throughout
  double severity_thresh = 0.10;
  double spacing_mm = 0.30;    // mm per pixel
  std::size_t smooth_window = 5;   // centered moving average, odd

  void validate() const;
};

enum class StenosisGrade { minimal, mild, moderate, severe };

const char* grade_name(StenosisGrade g);
StenosisGrade grade_from_severity(double b);

struct StenosisPoint {
  std::size_t row = 0, col = 0;
  double severity = 0.0;       // b = 1 - d_min/d_ref, fraction in [0,1)
  double d_min_mm = 0.0, d_ref_mm = 0.0;
  std::size_t segment_id = 0;
  StenosisGrade grade = StenosisGrade::minimal;
};

// One point per qualifying segment, at the argmin of the smoothed diameter
// profile. Segments are skipped when too short, too thin, lacking an interior
// local minimum, or below the severity threshold.
std::vector<StenosisPoint> detect_stenosis(const CenterlineGraph& graph,
                                           const DetectionConfig& config);

struct MatchResult {
  std::size_t tp = 0, fp = 0, fn = 0;
  // One entry per TP: (prediction index, ground-truth index, severities).
  struct Pair {
    std::size_t pred_index, gt_index;
    double b_pred, b_gt;
  };
  std::vector<Pair> pairs;
  std::vector<bool> pred_matched;  // per prediction
  std::vector<bool> gt_matched;    // per ground-truth point
};

// Greedy nearest-first matching within Euclidean radius r; each GT point is
// used at most once; ties broken by (distance, GT index).
MatchResult match_ground_truth(const std::vector<StenosisPoint>& pred,
                               const std::vector<StenosisPoint>& gt, double radius_px);

struct DetectionMetrics {
  double tpr = 0.0, ppv = 0.0, armse = 0.0, rrmse = 0.0;
  bool tpr_defined = false, ppv_defined = false;
  bool armse_defined = false, rrmse_defined = false;
};

DetectionMetrics detection_metrics(const MatchResult& match);

// Centered moving average with the window shrunk symmetrically at the ends.
std::vector<double> smooth_profile(const std::vector<double>& profile, std::size_t window);

}  // namespace sfd
