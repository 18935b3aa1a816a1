#include "sfd/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "sfd/vesselness.hpp"

namespace sfd {

void PhantomSpec::validate() const {
  if (height < 8 || width < 8) throw std::invalid_argument("PhantomSpec: canvas too small");
  if (vessel_intensity < 0.0 || vessel_intensity > 1.0 || background_intensity < 0.0 ||
      background_intensity > 1.0) {
    throw std::invalid_argument("PhantomSpec: intensities must lie in [0,1]");
  }
  if (noise_sigma < 0.0 || blur_sigma < 0.0) {
    throw std::invalid_argument("PhantomSpec: sigmas must be non-negative");
  }
  for (const Branch& b : branches) {
    if (b.control.size() != 2 && b.control.size() != 3) {
      throw std::invalid_argument("PhantomSpec: branch needs 2 or 3 control points");
    }
    if (b.radius_px < 1.0) throw std::invalid_argument("PhantomSpec: radius must be >= 1 px");
    if (b.stenosis) {
      const BranchStenosis& s = *b.stenosis;
      if (s.t0 <= 0.0 || s.t0 >= 1.0 || s.severity <= 0.0 || s.severity >= 1.0 ||
          s.extent_px <= 0.0) {
        throw std::invalid_argument("PhantomSpec: stenosis parameters out of range");
      }
    }
  }
}

namespace {

std::array<double, 2> curve_point(const Branch& b, double t) {
  if (b.control.size() == 2) {
    return {b.control[0][0] + t * (b.control[1][0] - b.control[0][0]),
            b.control[0][1] + t * (b.control[1][1] - b.control[0][1])};
  }
  const double u = 1.0 - t;
  std::array<double, 2> p{};
  for (int d = 0; d < 2; ++d) {
    p[d] = u * u * b.control[0][d] + 2.0 * u * t * b.control[1][d] + t * t * b.control[2][d];
  }
  return p;
}

double polyline_length(const Branch& b) {
  double len = 0.0;
  std::array<double, 2> prev = curve_point(b, 0.0);
  for (int i = 1; i <= 64; ++i) {
    const std::array<double, 2> p = curve_point(b, i / 64.0);
    len += std::hypot(p[0] - prev[0], p[1] - prev[1]);
    prev = p;
  }
  return len;
}

}  // namespace

PhantomSample render_phantom(const PhantomSpec& spec) {
  spec.validate();
  const std::size_t H = spec.height, W = spec.width;
  PhantomSample out;
  out.truth.mask = Tensor::zeros({H, W});
  Tensor& mask = out.truth.mask;

  for (const Branch& br : spec.branches) {
    const double len = std::max(polyline_length(br), 1.0);
    // 4x sub-pixel sampling along the arc keeps thin branches gap-free.
    const std::size_t n = static_cast<std::size_t>(std::ceil(4.0 * len)) + 1;
    std::vector<std::array<double, 2>> pts(n);
    std::vector<double> radii(n);
    std::vector<double> arc(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      pts[i] = curve_point(br, static_cast<double>(i) / static_cast<double>(n - 1));
      if (i > 0) {
        arc[i] = arc[i - 1] + std::hypot(pts[i][0] - pts[i - 1][0], pts[i][1] - pts[i - 1][1]);
      }
    }
    const double total = arc.back() > 0.0 ? arc.back() : 1.0;
    double s0 = 0.0;
    if (br.stenosis) s0 = br.stenosis->t0 * total;
    for (std::size_t i = 0; i < n; ++i) {
      double r = br.radius_px;
      if (br.stenosis) {
        const double z = (arc[i] - s0) / br.stenosis->extent_px;
        r *= 1.0 - br.stenosis->severity * std::exp(-z * z);
      }
      radii[i] = r;
      if (pts[i][0] < 0.0 || pts[i][0] > static_cast<double>(H - 1) || pts[i][1] < 0.0 ||
          pts[i][1] > static_cast<double>(W - 1)) {
        throw std::invalid_argument("render_phantom: branch leaves canvas");
      }
    }
    // Rasterize the swept disks: a pixel is vessel when its center falls
    // inside any sample disk.
    for (std::size_t i = 0; i < n; ++i) {
      const double r = radii[i];
      const long r0 = std::max<long>(0, static_cast<long>(std::floor(pts[i][0] - r)));
      const long r1 = std::min<long>(static_cast<long>(H) - 1,
                                     static_cast<long>(std::ceil(pts[i][0] + r)));
      const long c0 = std::max<long>(0, static_cast<long>(std::floor(pts[i][1] - r)));
      const long c1 = std::min<long>(static_cast<long>(W) - 1,
                                     static_cast<long>(std::ceil(pts[i][1] + r)));
      for (long rr = r0; rr <= r1; ++rr) {
        for (long cc = c0; cc <= c1; ++cc) {
          const double dr = static_cast<double>(rr) - pts[i][0];
          const double dc = static_cast<double>(cc) - pts[i][1];
          if (dr * dr + dc * dc <= r * r) {
            mask.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) = 1.0;
          }
        }
      }
    }
    out.truth.centerlines.push_back(pts);
    out.truth.radius_profiles.push_back(radii);
    if (br.stenosis) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (std::abs(arc[i] - s0) < std::abs(arc[best] - s0)) best = i;
      }
      PhantomGtStenosis gt;
      gt.row = static_cast<std::size_t>(std::lround(pts[best][0]));
      gt.col = static_cast<std::size_t>(std::lround(pts[best][1]));
      gt.severity = br.stenosis->severity;
      out.truth.stenoses.push_back(gt);
    }
  }

  Tensor img({H, W});
  for (std::size_t i = 0; i < img.size(); ++i) {
    img[i] = mask[i] != 0.0 ? spec.vessel_intensity : spec.background_intensity;
  }
  if (spec.blur_sigma > 0.0) img = gaussian_smooth(img, spec.blur_sigma);
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] += noise(rng);
  }
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::clamp(img[i], 0.0, 1.0);
  out.image = std::move(img);
  return out;
}

namespace {

Branch straight(double r0, double c0, double r1, double c1, double radius) {
  Branch b;
  b.control = {{{r0, c0}}, {{r1, c1}}};
  b.radius_px = radius;
  return b;
}

}  // namespace

std::vector<PhantomSpec> phantom_corpus(const std::string& preset, std::uint64_t seed,
                                        std::size_t count) {
  if (count == 0) throw std::invalid_argument("phantom_corpus: count must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-3.0, 3.0);
  std::vector<PhantomSpec> specs;
  specs.reserve(count);

  if (preset == "tubes") {
    // Odd widths rasterize exactly on integer rows; even widths on
    // half-integer rows.
    const double widths[] = {2.0, 3.0, 5.0, 7.0, 9.0};
    for (std::size_t i = 0; i < count; ++i) {
      const double w = widths[i % 5];
      PhantomSpec s;
      s.seed = seed + i;
      s.noise_sigma = 0.0;
      double row = 32.0 + std::floor(jitter(rng));
      if (std::fmod(w, 2.0) == 0.0) row += 0.5;
      s.branches.push_back(straight(row, 6.0, row, 57.0, w / 2.0));
      specs.push_back(s);
    }
  } else if (preset == "bifurcations") {
    for (std::size_t i = 0; i < count; ++i) {
      PhantomSpec s;
      s.seed = seed + i;
      const double jr = std::floor(jitter(rng));
      // Trunk rising to a junction, then two diverging limbs.
      s.branches.push_back(straight(56.0 + jr / 2.0, 32.0, 32.0 + jr, 32.0, 2.5));
      s.branches.push_back(straight(32.0 + jr, 32.0, 10.0 + jr / 2.0, 14.0, 2.0));
      s.branches.push_back(straight(32.0 + jr, 32.0, 10.0 + jr / 2.0, 50.0, 2.0));
      specs.push_back(s);
    }
  } else if (preset == "stenoses") {
    const double severities[] = {0.15, 0.35, 0.60, 0.80};
    for (std::size_t i = 0; i < count; ++i) {
      PhantomSpec s;
      s.seed = seed + i;
      s.noise_sigma = 0.0;
      const double row = 32.0 + std::floor(jitter(rng));
      Branch b = straight(row, 4.0, row, 59.0, 4.5);  // 9 px wide, 2.7 mm
      BranchStenosis st;
      st.severity = severities[i % 4];
      st.t0 = 0.35 + 0.3 * ((i / 4) % 2);  // alternate lesion positions
      st.extent_px = 7.0;
      b.stenosis = st;
      s.branches.push_back(b);
      specs.push_back(s);
    }
  } else if (preset == "mixed") {
    const double noise[] = {0.0, 0.02, 0.05, 0.1};
    for (std::size_t i = 0; i < count; ++i) {
      PhantomSpec s;
      s.seed = seed + i;
      s.noise_sigma = noise[i % 4];
      const double row = 24.0 + std::floor(jitter(rng));
      s.branches.push_back(straight(row, 6.0, row, 57.0, 2.5));
      Branch curved;
      curved.control = {{{50.0, 8.0}}, {{40.0 + jitter(rng), 32.0}}, {{50.0, 56.0}}};
      curved.radius_px = 2.0;
      if (i % 3 == 0) {
        BranchStenosis st;
        st.severity = 0.5;
        st.t0 = 0.5;
        st.extent_px = 6.0;
        s.branches.back().stenosis = st;
      }
      s.branches.push_back(curved);
      specs.push_back(s);
    }
  } else {
    throw std::invalid_argument("phantom_corpus: unknown preset '" + preset + "'");
  }
  return specs;
}

}  // namespace sfd
