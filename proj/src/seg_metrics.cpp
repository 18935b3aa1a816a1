#include "sfd/seg_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sfd {

namespace {

void check_mask(const Tensor& t, const char* who) {
  if (t.rank() != 2) throw std::invalid_argument(std::string(who) + ": mask must be [H,W]");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != 0.0 && t[i] != 1.0) {
      throw std::invalid_argument(std::string(who) + ": mask must be binary 0/1");
    }
  }
}

}  // namespace

ConfusionCounts confusion(const Tensor& pred_mask, const Tensor& gt_mask) {
  check_mask(pred_mask, "confusion");
  check_mask(gt_mask, "confusion");
  if (!pred_mask.same_shape(gt_mask)) {
    throw std::invalid_argument("confusion: pred/gt shapes differ (" + pred_mask.shape_str() +
                                " vs " + gt_mask.shape_str() + ")");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred_mask.size(); ++i) {
    const bool p = pred_mask[i] != 0.0, g = gt_mask[i] != 0.0;
    if (p && g) ++c.tp;
    else if (p && !g) ++c.fp;
    else if (!p && g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

OverlapMetrics overlap_metrics(const ConfusionCounts& c) {
  OverlapMetrics m;
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);

  const bool both_empty = c.tp + c.fp == 0 && c.tp + c.fn == 0;
  if (both_empty) {
    m.dice = m.iou = m.f1 = 1.0;
  } else {
    m.dice = 2.0 * tp / (2.0 * tp + fp + fn);
    m.iou = tp / (tp + fp + fn);
    // F1 computed literally from precision/recall so the Dice identity is a
    // genuine cross-check, with 0 at the tp = 0 limit.
    if (c.tp > 0) {
      const double prec = tp / (tp + fp);
      const double rec = tp / (tp + fn);
      m.f1 = 2.0 * prec * rec / (prec + rec);
    } else {
      m.f1 = 0.0;
    }
  }
  m.acc = c.total() > 0 ? (tp + tn) / static_cast<double>(c.total()) : 1.0;
  if (c.tp + c.fn > 0) {
    m.sens = tp / (tp + fn);
    m.sens_defined = true;
  }
  if (c.tn + c.fp > 0) {
    m.spec = tn / (tn + fp);
    m.spec_defined = true;
  }
  return m;
}

std::vector<std::pair<std::size_t, std::size_t>> boundary_pixels(const Tensor& mask) {
  check_mask(mask, "boundary_pixels");
  const long H = static_cast<long>(mask.dim(0)), W = static_cast<long>(mask.dim(1));
  auto bg = [&](long r, long c) {
    if (r < 0 || c < 0 || r >= H || c >= W) return true;  // border is background
    return mask.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) == 0.0;
  };
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (long r = 0; r < H; ++r) {
    for (long c = 0; c < W; ++c) {
      if (bg(r, c)) continue;
      if (bg(r - 1, c) || bg(r + 1, c) || bg(r, c - 1) || bg(r, c + 1)) {
        out.emplace_back(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      }
    }
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: empty sample");
  if (q < 0.0 || q > 100.0) throw std::invalid_argument("percentile: q outside [0,100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

static std::vector<double> directed_distances(
    const std::vector<std::pair<std::size_t, std::size_t>>& from,
    const std::vector<std::pair<std::size_t, std::size_t>>& to) {
  std::vector<double> out;
  out.reserve(from.size());
  for (const auto& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) {
      const double dr = static_cast<double>(a.first) - static_cast<double>(b.first);
      const double dc = static_cast<double>(a.second) - static_cast<double>(b.second);
      best = std::min(best, dr * dr + dc * dc);
    }
    out.push_back(std::sqrt(best));
  }
  return out;
}

SurfaceDistance hd95(const std::vector<std::pair<std::size_t, std::size_t>>& a,
                     const std::vector<std::pair<std::size_t, std::size_t>>& b) {
  SurfaceDistance r;
  if (a.empty() || b.empty()) return r;
  const double pa = percentile(directed_distances(a, b), 95.0);
  const double pb = percentile(directed_distances(b, a), 95.0);
  r.value = std::max(pa, pb);
  r.defined = true;
  return r;
}

SurfaceDistance assd(const std::vector<std::pair<std::size_t, std::size_t>>& a,
                     const std::vector<std::pair<std::size_t, std::size_t>>& b) {
  SurfaceDistance r;
  if (a.empty() || b.empty()) return r;
  const std::vector<double> da = directed_distances(a, b);
  const std::vector<double> db = directed_distances(b, a);
  double acc = 0.0;
  for (double d : da) acc += d;
  for (double d : db) acc += d;
  r.value = acc / static_cast<double>(a.size() + b.size());
  r.defined = true;
  return r;
}

}  // namespace sfd
