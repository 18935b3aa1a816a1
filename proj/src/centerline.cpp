#include "sfd/centerline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sfd {

namespace {

void check_binary_2d(const Tensor& t, const char* who) {
  if (t.rank() != 2) throw std::invalid_argument(std::string(who) + ": map must be [H,W]");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != 0.0 && t[i] != 1.0) {
      throw std::invalid_argument(std::string(who) + ": map must be binary 0/1");
    }
  }
}

// Clockwise 8-neighborhood starting north: P2..P9 in Zhang-Suen numbering.
constexpr int kOffR[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kOffC[8] = {0, 1, 1, 1, 0, -1, -1, -1};

inline double px(const Tensor& m, long r, long c) {
  if (r < 0 || c < 0 || r >= static_cast<long>(m.dim(0)) || c >= static_cast<long>(m.dim(1))) {
    return 0.0;
  }
  return m.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
}

}  // namespace

Tensor skeletonize(const Tensor& mask) {
  check_binary_2d(mask, "skeletonize");
  Tensor img = mask;
  const long H = static_cast<long>(img.dim(0)), W = static_cast<long>(img.dim(1));
  std::vector<PixelCoord> to_clear;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      to_clear.clear();
      for (long r = 0; r < H; ++r) {
        for (long c = 0; c < W; ++c) {
          if (px(img, r, c) == 0.0) continue;
          double p[8];
          int bp = 0;
          for (int k = 0; k < 8; ++k) {
            p[k] = px(img, r + kOffR[k], c + kOffC[k]);
            bp += p[k] != 0.0 ? 1 : 0;
          }
          if (bp < 2 || bp > 6) continue;
          int ap = 0;  // 0->1 transitions around the ring
          for (int k = 0; k < 8; ++k) {
            if (p[k] == 0.0 && p[(k + 1) % 8] != 0.0) ++ap;
          }
          if (ap != 1) continue;
          // p[0]=P2(N), p[2]=P4(E), p[4]=P6(S), p[6]=P8(W)
          const bool cond = pass == 0
                                ? (p[0] * p[2] * p[4] == 0.0 && p[2] * p[4] * p[6] == 0.0)
                                : (p[0] * p[2] * p[6] == 0.0 && p[0] * p[4] * p[6] == 0.0);
          if (cond) {
            to_clear.emplace_back(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
          }
        }
      }
      for (const auto& [r, c] : to_clear) img.at(r, c) = 0.0;
      if (!to_clear.empty()) changed = true;
    }
  }
  return img;
}

// 1-D squared-distance lower envelope (Felzenszwalb & Huttenlocher).
static void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const std::size_t n = f.size();
  d.assign(n, 0.0);
  std::vector<int> v(n, 0);
  std::vector<double> z(n + 1, 0.0);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < static_cast<int>(n); ++q) {
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * (q - p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < static_cast<int>(n); ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

Tensor euclidean_distance_transform(const Tensor& mask) {
  check_binary_2d(mask, "euclidean_distance_transform");
  const std::size_t H = mask.dim(0), W = mask.dim(1);
  // Pad a one-pixel background ring so the frame counts as background, then
  // run the exact two-pass squared-distance transform on the padded grid.
  const std::size_t Hp = H + 2, Wp = W + 2;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> g(Hp * Wp, 0.0);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      g[(r + 1) * Wp + (c + 1)] = mask.at(r, c) != 0.0 ? inf : 0.0;
    }
  }
  std::vector<double> col(Hp), dcol;
  for (std::size_t c = 0; c < Wp; ++c) {
    for (std::size_t r = 0; r < Hp; ++r) col[r] = g[r * Wp + c];
    edt_1d(col, dcol);
    for (std::size_t r = 0; r < Hp; ++r) g[r * Wp + c] = dcol[r];
  }
  std::vector<double> row(Wp), drow;
  Tensor out({H, W});
  for (std::size_t r = 0; r < Hp; ++r) {
    for (std::size_t c = 0; c < Wp; ++c) row[c] = g[r * Wp + c];
    edt_1d(row, drow);
    if (r >= 1 && r <= H) {
      for (std::size_t c = 0; c < W; ++c) out.at(r - 1, c) = std::sqrt(drow[c + 1]);
    }
  }
  return out;
}

CenterlineGraph decompose_segments(const Tensor& skeleton) {
  check_binary_2d(skeleton, "decompose_segments");
  const long H = static_cast<long>(skeleton.dim(0)), W = static_cast<long>(skeleton.dim(1));
  CenterlineGraph g;
  g.skeleton = skeleton;
  g.degree = Tensor::zeros({skeleton.dim(0), skeleton.dim(1)});
  for (long r = 0; r < H; ++r) {
    for (long c = 0; c < W; ++c) {
      if (px(skeleton, r, c) == 0.0) continue;
      int deg = 0;
      for (int k = 0; k < 8; ++k) deg += px(skeleton, r + kOffR[k], c + kOffC[k]) != 0.0;
      g.degree.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = deg;
    }
  }

  auto deg_at = [&](const PixelCoord& p) {
    return static_cast<int>(g.degree.at(p.first, p.second));
  };
  auto is_node = [&](const PixelCoord& p) { return deg_at(p) != 2; };

  // Directed-edge visitation: an undirected step (a->b) is consumed in both
  // directions once walked, so each chain is emitted exactly once.
  std::vector<std::vector<bool>> used;  // used[flat index][neighbor slot]
  used.assign(static_cast<std::size_t>(H * W), {});
  for (auto& u : used) u.assign(8, false);

  auto neighbor_slot = [&](const PixelCoord& from, const PixelCoord& to) {
    for (int k = 0; k < 8; ++k) {
      if (static_cast<long>(from.first) + kOffR[k] == static_cast<long>(to.first) &&
          static_cast<long>(from.second) + kOffC[k] == static_cast<long>(to.second)) {
        return k;
      }
    }
    throw std::logic_error("decompose_segments: pixels not adjacent");
  };
  auto flat = [W](const PixelCoord& p) {
    return p.first * static_cast<std::size_t>(W) + p.second;
  };
  auto mark = [&](const PixelCoord& a, const PixelCoord& b) {
    used[flat(a)][static_cast<std::size_t>(neighbor_slot(a, b))] = true;
    used[flat(b)][static_cast<std::size_t>(neighbor_slot(b, a))] = true;
  };
  auto is_used = [&](const PixelCoord& a, const PixelCoord& b) {
    return used[flat(a)][static_cast<std::size_t>(neighbor_slot(a, b))];
  };
  auto neighbors = [&](const PixelCoord& p) {
    std::vector<PixelCoord> out;
    for (int k = 0; k < 8; ++k) {
      const long nr = static_cast<long>(p.first) + kOffR[k];
      const long nc = static_cast<long>(p.second) + kOffC[k];
      if (px(skeleton, nr, nc) != 0.0) {
        out.emplace_back(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc));
      }
    }
    return out;
  };

  auto walk = [&](PixelCoord start, PixelCoord next) {
    CenterlineSegment seg;
    seg.points.push_back(start);
    PixelCoord prev = start, cur = next;
    mark(prev, cur);
    while (true) {
      seg.points.push_back(cur);
      if (is_node(cur)) break;
      PixelCoord nxt = cur;
      bool found = false;
      for (const PixelCoord& nb : neighbors(cur)) {
        if (nb != prev && !is_used(cur, nb)) {
          nxt = nb;
          found = true;
          break;
        }
      }
      if (!found) break;  // dead end (can happen on diagonal shortcuts)
      mark(cur, nxt);
      prev = cur;
      cur = nxt;
    }
    return seg;
  };

  // Pass 1: chains anchored at endpoints and bifurcations, scanned in
  // row-major order so the output is deterministic.
  for (long r = 0; r < H; ++r) {
    for (long c = 0; c < W; ++c) {
      const PixelCoord p{static_cast<std::size_t>(r), static_cast<std::size_t>(c)};
      if (px(skeleton, r, c) == 0.0 || !is_node(p) || deg_at(p) == 0) continue;
      for (const PixelCoord& nb : neighbors(p)) {
        if (!is_used(p, nb)) g.segments.push_back(walk(p, nb));
      }
    }
  }
  // Isolated pixels become one-point segments.
  for (long r = 0; r < H; ++r) {
    for (long c = 0; c < W; ++c) {
      const PixelCoord p{static_cast<std::size_t>(r), static_cast<std::size_t>(c)};
      if (px(skeleton, r, c) != 0.0 && deg_at(p) == 0) g.segments.push_back({{p}, {}, {}});
    }
  }
  // Pass 2: pure cycles (all degree 2, nothing anchored). Cut each at its
  // lexicographically smallest pixel, which row-major scanning finds first.
  for (long r = 0; r < H; ++r) {
    for (long c = 0; c < W; ++c) {
      const PixelCoord p{static_cast<std::size_t>(r), static_cast<std::size_t>(c)};
      if (px(skeleton, r, c) == 0.0 || deg_at(p) != 2) continue;
      const auto nbs = neighbors(p);
      if (is_used(p, nbs[0])) continue;
      CenterlineSegment seg = walk(p, nbs[0]);
      // The walk returns to its start; drop the duplicate so the segment's
      // first and last points are 8-adjacent instead of equal.
      if (seg.points.size() > 1 && seg.points.back() == seg.points.front()) {
        seg.points.pop_back();
      }
      g.segments.push_back(std::move(seg));
    }
  }
  return g;
}

void diameter_map(CenterlineGraph& graph, const Tensor& mask, double spacing_mm) {
  check_binary_2d(mask, "diameter_map");
  if (!mask.same_shape(graph.skeleton)) {
    throw std::invalid_argument("diameter_map: mask/skeleton shape mismatch");
  }
  if (spacing_mm <= 0.0) throw std::invalid_argument("diameter_map: spacing must be > 0");
  const Tensor edt = euclidean_distance_transform(mask);
  for (CenterlineSegment& seg : graph.segments) {
    seg.diameter_px.clear();
    seg.diameter_mm.clear();
    for (const PixelCoord& p : seg.points) {
      if (mask.at(p.first, p.second) == 0.0) {
        throw std::invalid_argument("diameter_map: skeleton point (" +
                                    std::to_string(p.first) + "," + std::to_string(p.second) +
                                    ") lies outside the mask");
      }
      const double d = 2.0 * edt.at(p.first, p.second);
      seg.diameter_px.push_back(d);
      seg.diameter_mm.push_back(d * spacing_mm);
    }
  }
}

}  // namespace sfd
