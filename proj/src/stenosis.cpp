#include "sfd/stenosis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace sfd {

void DetectionConfig::validate() const {
  if (radius_px <= 0.0 || diameter_thresh_mm <= 0.0 || severity_thresh <= 0.0 ||
      spacing_mm <= 0.0 || length_thresh == 0 || smooth_window == 0) {
    throw std::invalid_argument("DetectionConfig: all parameters must be positive");
  }
  if (smooth_window % 2 == 0) {
    throw std::invalid_argument("DetectionConfig: smoothing window must be odd");
  }
}

const char* grade_name(StenosisGrade g) {
  switch (g) {
    case StenosisGrade::minimal: return "minimal";
    case StenosisGrade::mild: return "mild";
    case StenosisGrade::moderate: return "moderate";
    case StenosisGrade::severe: return "severe";
  }
  return "?";
}

StenosisGrade grade_from_severity(double b) {
  if (b < 0.25) return StenosisGrade::minimal;
  if (b < 0.50) return StenosisGrade::mild;
  if (b < 0.70) return StenosisGrade::moderate;
  return StenosisGrade::severe;
}

std::vector<double> smooth_profile(const std::vector<double>& profile, std::size_t window) {
  const std::size_t half = window / 2;
  std::vector<double> out(profile.size());
  for (std::size_t i = 0; i < profile.size(); ++i) {
    // Shrink symmetrically near the ends so the average stays centered.
    const std::size_t room = std::min({half, i, profile.size() - 1 - i});
    double acc = 0.0;
    for (std::size_t j = i - room; j <= i + room; ++j) acc += profile[j];
    out[i] = acc / static_cast<double>(2 * room + 1);
  }
  return out;
}

std::vector<StenosisPoint> detect_stenosis(const CenterlineGraph& graph,
                                           const DetectionConfig& config) {
  config.validate();
  std::vector<StenosisPoint> out;
  for (std::size_t s = 0; s < graph.segments.size(); ++s) {
    const CenterlineSegment& seg = graph.segments[s];
    if (seg.diameter_mm.size() != seg.points.size()) {
      throw std::invalid_argument("detect_stenosis: diameters not populated");
    }
    if (seg.points.size() < config.length_thresh) continue;
    const double max_d = *std::max_element(seg.diameter_mm.begin(), seg.diameter_mm.end());
    if (max_d < config.diameter_thresh_mm) continue;

    const std::vector<double> d = smooth_profile(seg.diameter_mm, config.smooth_window);
    const std::size_t n = d.size();
    std::size_t argmin = n;  // interior local minima
    double d_min = 0.0;
    double d_ref = 0.0;
    bool have_max = false;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (d[i] < d[i - 1] && d[i] <= d[i + 1]) {
        if (argmin == n || d[i] < d_min) {
          d_min = d[i];
          argmin = i;
        }
      }
      if (d[i] > d[i - 1] && d[i] >= d[i + 1]) {
        d_ref = have_max ? std::max(d_ref, d[i]) : d[i];
        have_max = true;
      }
    }
    if (argmin == n) continue;  // no narrowing anywhere: non-stenotic
    if (!have_max) d_ref = *std::max_element(d.begin(), d.end());
    if (d_ref <= 0.0 || d_min <= 0.0) continue;

    const double b = 1.0 - d_min / d_ref;
    if (b < config.severity_thresh) continue;

    StenosisPoint p;
    p.row = seg.points[argmin].first;
    p.col = seg.points[argmin].second;
    p.severity = b;
    p.d_min_mm = d_min;
    p.d_ref_mm = d_ref;
    p.segment_id = s;
    p.grade = grade_from_severity(b);
    out.push_back(p);
  }
  return out;
}

MatchResult match_ground_truth(const std::vector<StenosisPoint>& pred,
                               const std::vector<StenosisPoint>& gt, double radius_px) {
  MatchResult res;
  res.pred_matched.assign(pred.size(), false);
  res.gt_matched.assign(gt.size(), false);

  struct Cand {
    double dist;
    std::size_t gi, pi;
  };
  std::vector<Cand> cands;
  for (std::size_t pi = 0; pi < pred.size(); ++pi) {
    for (std::size_t gi = 0; gi < gt.size(); ++gi) {
      const double dr = static_cast<double>(pred[pi].row) - static_cast<double>(gt[gi].row);
      const double dc = static_cast<double>(pred[pi].col) - static_cast<double>(gt[gi].col);
      const double dist = std::hypot(dr, dc);
      if (dist <= radius_px) cands.push_back({dist, gi, pi});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return std::tie(a.dist, a.gi, a.pi) < std::tie(b.dist, b.gi, b.pi);
  });
  for (const Cand& c : cands) {
    if (res.pred_matched[c.pi] || res.gt_matched[c.gi]) continue;
    res.pred_matched[c.pi] = true;
    res.gt_matched[c.gi] = true;
    res.pairs.push_back({c.pi, c.gi, pred[c.pi].severity, gt[c.gi].severity});
  }
  res.tp = res.pairs.size();
  res.fp = pred.size() - res.tp;
  res.fn = gt.size() - res.tp;
  return res;
}

DetectionMetrics detection_metrics(const MatchResult& match) {
  DetectionMetrics m;
  if (match.tp + match.fn > 0) {
    m.tpr = static_cast<double>(match.tp) / static_cast<double>(match.tp + match.fn);
    m.tpr_defined = true;
  }
  if (match.tp + match.fp > 0) {
    m.ppv = static_cast<double>(match.tp) / static_cast<double>(match.tp + match.fp);
    m.ppv_defined = true;
  }
  if (!match.pairs.empty()) {
    double acc_a = 0.0, acc_r = 0.0;
    bool rel_ok = true;
    for (const auto& p : match.pairs) {
      const double e = p.b_pred - p.b_gt;
      acc_a += e * e;
      if (p.b_gt > 0.0) {
        const double rel = e / p.b_gt;
        acc_r += rel * rel;
      } else {
        rel_ok = false;
      }
    }
    m.armse = std::sqrt(acc_a / static_cast<double>(match.pairs.size()));
    m.armse_defined = true;
    if (rel_ok) {
      m.rrmse = std::sqrt(acc_r / static_cast<double>(match.pairs.size()));
      m.rrmse_defined = true;
    }
  }
  return m;
}

}  // namespace sfd
