#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "sfd/centerline.hpp"
#include "sfd/phantom.hpp"
#include "sfd/seg_metrics.hpp"
#include "sfd/stenosis.hpp"

using namespace sfd;

namespace {

PhantomSpec one_bar(double radius, double row = 32.0) {
  PhantomSpec s;
  Branch b;
  b.control = {{{row, 5.0}}, {{row, 58.0}}};
  b.radius_px = radius;
  s.branches.push_back(b);
  return s;
}

std::size_t column_width(const Tensor& mask, std::size_t col) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < mask.dim(0); ++r) w += mask.at(r, col) != 0.0;
  return w;
}

}  // namespace

TEST_CASE("spec validation rejects bad geometry") {
  CHECK_THROWS(render_phantom(one_bar(0.5)));  // radius below 1 px

  PhantomSpec outside = one_bar(3.0);
  outside.branches[0].control[1] = {32.0, 80.0};
  CHECK_THROWS(render_phantom(outside));

  PhantomSpec bad_sten = one_bar(3.0);
  bad_sten.branches[0].stenosis = BranchStenosis{1.5, 0.5, 8.0};
  CHECK_THROWS(render_phantom(bad_sten));
  bad_sten.branches[0].stenosis = BranchStenosis{0.5, 1.2, 8.0};
  CHECK_THROWS(render_phantom(bad_sten));

  PhantomSpec tiny = one_bar(2.0);
  tiny.height = 4;
  CHECK_THROWS(tiny.validate());

  CHECK_THROWS(phantom_corpus("nope", 0, 4));
  CHECK_THROWS(phantom_corpus("tubes", 0, 0));
}

TEST_CASE("straight bar rasterizes at constant width with matching diameters") {
  const PhantomSample s = render_phantom(one_bar(2.5));
  // Radius 2.5 sweeps rows 32 +/- 2: a 5-px bar.
  for (std::size_t c = 8; c <= 55; ++c) {
    CHECK(column_width(s.truth.mask, c) == 5);
    for (std::size_t r = 30; r <= 34; ++r) CHECK(s.truth.mask.at(r, c) == 1.0);
  }
  // Interior centerline diameters: 2*EDT of a width-w bar is w+1.
  const Tensor edt = euclidean_distance_transform(s.truth.mask);
  for (std::size_t c = 10; c <= 53; ++c) {
    CHECK(2.0 * edt.at(32, c) == doctest::Approx(6.0));
  }
}

TEST_CASE("programmed minimum radius appears exactly in the truth profile") {
  PhantomSpec spec = one_bar(4.0);
  spec.branches[0].stenosis = BranchStenosis{0.5, 0.5, 7.0};
  const PhantomSample s = render_phantom(spec);
  REQUIRE(s.truth.radius_profiles.size() == 1);
  double rmin = 1e9;
  for (double r : s.truth.radius_profiles[0]) rmin = std::min(rmin, r);
  CHECK(rmin == doctest::Approx(2.0).epsilon(1e-3));
  REQUIRE(s.truth.stenoses.size() == 1);
  CHECK(s.truth.stenoses[0].severity == 0.5);
  CHECK(s.truth.stenoses[0].row == 32);
  // The lesion sits at the parameter midpoint of the bar.
  CHECK(s.truth.stenoses[0].col > 25);
  CHECK(s.truth.stenoses[0].col < 38);
}

TEST_CASE("rendering is deterministic per seed") {
  PhantomSpec spec = one_bar(3.0);
  spec.noise_sigma = 0.05;
  spec.seed = 42;
  const PhantomSample a = render_phantom(spec);
  const PhantomSample b = render_phantom(spec);
  CHECK(max_abs_diff(a.image, b.image) == 0.0);
  CHECK(max_abs_diff(a.truth.mask, b.truth.mask) == 0.0);

  spec.seed = 43;
  const PhantomSample c = render_phantom(spec);
  CHECK(max_abs_diff(a.image, c.image) > 0.0);  // noise depends on the seed
  CHECK(max_abs_diff(a.truth.mask, c.truth.mask) == 0.0);  // geometry does not
}

TEST_CASE("corpus presets cover their advertised variety") {
  SUBCASE("tubes hit all five widths") {
    const auto specs = phantom_corpus("tubes", 7, 10);
    REQUIRE(specs.size() == 10);
    std::map<std::size_t, std::size_t> width_counts;
    for (const PhantomSpec& spec : specs) {
      const PhantomSample s = render_phantom(spec);
      // Measure mid-bar width; radius w/2 gives a bar exactly w pixels wide.
      ++width_counts[column_width(s.truth.mask, 32)];
    }
    for (std::size_t w : {2, 3, 5, 7, 9}) CHECK(width_counts[w] == 2);
  }
  SUBCASE("stenoses cover all four severity bins with exact truth") {
    const auto specs = phantom_corpus("stenoses", 3, 32);
    std::map<StenosisGrade, std::size_t> bins;
    for (const PhantomSpec& spec : specs) {
      REQUIRE(spec.branches.size() == 1);
      REQUIRE(spec.branches[0].stenosis.has_value());
      CHECK(spec.noise_sigma == 0.0);
      ++bins[grade_from_severity(spec.branches[0].stenosis->severity)];
    }
    CHECK(bins[StenosisGrade::minimal] >= 4);
    CHECK(bins[StenosisGrade::mild] >= 4);
    CHECK(bins[StenosisGrade::moderate] >= 4);
    CHECK(bins[StenosisGrade::severe] >= 4);
  }
  SUBCASE("regeneration with the same seed is identical") {
    const auto a = phantom_corpus("mixed", 5, 6);
    const auto b = phantom_corpus("mixed", 5, 6);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(max_abs_diff(render_phantom(a[i]).image, render_phantom(b[i]).image) == 0.0);
    }
  }
}

TEST_CASE("centerline samples stay inside the mask") {
  for (const char* preset : {"tubes", "bifurcations", "mixed"}) {
    const auto specs = phantom_corpus(preset, 2, 4);
    for (const PhantomSpec& spec : specs) {
      const PhantomSample s = render_phantom(spec);
      for (const auto& line : s.truth.centerlines) {
        for (const auto& p : line) {
          const std::size_t r = static_cast<std::size_t>(std::lround(p[0]));
          const std::size_t c = static_cast<std::size_t>(std::lround(p[1]));
          CHECK(s.truth.mask.at(r, c) == 1.0);
        }
      }
    }
  }
}

TEST_CASE("pipeline recovers programmed severities within 0.10 on clean bars") {
  const auto specs = phantom_corpus("stenoses", 9, 8);
  DetectionConfig cfg;
  for (const PhantomSpec& spec : specs) {
    const PhantomSample s = render_phantom(spec);
    CenterlineGraph g = decompose_segments(skeletonize(s.truth.mask));
    diameter_map(g, s.truth.mask, cfg.spacing_mm);
    const auto pts = detect_stenosis(g, cfg);
    REQUIRE(s.truth.stenoses.size() == 1);
    const PhantomGtStenosis& gt = s.truth.stenoses[0];

    double best_dist = 1e9;
    const StenosisPoint* best = nullptr;
    for (const StenosisPoint& p : pts) {
      const double dr = static_cast<double>(p.row) - static_cast<double>(gt.row);
      const double dc = static_cast<double>(p.col) - static_cast<double>(gt.col);
      const double d = std::hypot(dr, dc);
      if (d < best_dist) {
        best_dist = d;
        best = &p;
      }
    }
    REQUIRE(best != nullptr);
    CHECK(best_dist <= cfg.radius_px);
    CHECK(std::abs(best->severity - gt.severity) <= 0.10);
  }
}

TEST_CASE("thresholding the image degrades with noise") {
  PhantomSpec spec = one_bar(3.5);
  spec.seed = 17;
  double prev_dice = 1.1;
  for (double sigma : {0.0, 0.05, 0.1, 0.2}) {
    spec.noise_sigma = sigma;
    const PhantomSample s = render_phantom(spec);
    Tensor pred = Tensor::zeros({spec.height, spec.width});
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = s.image[i] < 0.55 ? 1.0 : 0.0;  // vessels are dark
    }
    const double dice = overlap_metrics(confusion(pred, s.truth.mask)).dice;
    if (sigma == 0.0) CHECK(dice > 0.9);
    CHECK(dice <= prev_dice + 0.02);
    prev_dice = dice;
  }
  CHECK(prev_dice < 1.0);  // the noisiest rendering is measurably worse
}
