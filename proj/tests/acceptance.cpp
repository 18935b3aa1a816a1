// Acceptance gate: one self-contained check per release criterion, each
// printing a single PASS/FAIL line. Exits non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sfd/centerline.hpp"
#include "sfd/mamba2.hpp"
#include "sfd/network.hpp"
#include "sfd/nn_ops.hpp"
#include "sfd/phantom.hpp"
#include "sfd/seg_metrics.hpp"
#include "sfd/ssd.hpp"
#include "sfd/stenosis.hpp"
#include "sfd/vesselness.hpp"
#include "sfd/wavelet.hpp"
#include "sfd/weight_store.hpp"

namespace fs = std::filesystem;
using namespace sfd;

namespace {

using clock_t_ = std::chrono::steady_clock;

double seconds_since(clock_t_::time_point t0) {
  return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& msg) {
    if (!cond && ok) {
      ok = false;
      detail = msg;
    }
  }
};

// ---------------------------------------------------------------- criterion 1
Check ssd_oracle_equivalence() {
  Check c;
  const auto t0 = clock_t_::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t B = 1 + rng() % 2, L = 1 + rng() % 128;
    const std::size_t H = 1 + rng() % 4, P = 1 + rng() % 8, N = 1 + rng() % 16;
    SSDParams p;
    p.n_heads = H;
    p.head_dim = P;
    p.state_dim = N;
    p.A_log = random_uniform({H}, rng, -1.0, 1.5);
    p.dt_bias = random_uniform({H}, rng, -2.0, 0.0);
    p.D = random_uniform({H}, rng);
    const Tensor x = random_uniform({B, L, H, P}, rng, -1.0, 1.0);
    const Tensor Bi = random_uniform({B, L, N}, rng, -1.0, 1.0);
    const Tensor Ci = random_uniform({B, L, N}, rng, -1.0, 1.0);
    const Tensor dt = random_uniform({B, L, H}, rng, -1.0, 1.0);
    const Tensor ref = ssm_naive_oracle(x, Bi, Ci, dt, p);
    for (std::size_t q : {std::size_t(4), std::size_t(8), std::size_t(16), L}) {
      p.chunk_size = q;
      worst = std::max(worst, max_abs_diff(ssd_chunked(x, Bi, Ci, dt, p), ref));
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "max-abs deviation " << worst << ", " << secs << " s";
  c.detail = d.str();
  c.require(worst < 1e-8, c.detail);
  c.require(secs < 10.0, c.detail);
  return c;
}

// ---------------------------------------------------------------- criterion 2
Check ssd_gradient_check() {
  Check c;
  const auto t0 = clock_t_::now();
  std::mt19937_64 rng(55);
  SSDParams params;
  params.n_heads = 2;
  params.head_dim = 3;
  params.state_dim = 4;
  params.chunk_size = 4;
  params.A_log = random_uniform({2}, rng, -1.0, 1.0);
  params.dt_bias = random_uniform({2}, rng, -1.0, 0.0);
  params.D = random_uniform({2}, rng);
  Tensor x = random_uniform({2, 8, 2, 3}, rng, -1.0, 1.0);
  Tensor Bi = random_uniform({2, 8, 4}, rng, -1.0, 1.0);
  Tensor Ci = random_uniform({2, 8, 4}, rng, -1.0, 1.0);
  Tensor dt = random_uniform({2, 8, 2}, rng, -1.0, 1.0);
  const Tensor up = random_uniform({2, 8, 2, 3}, rng, -1.0, 1.0);

  auto loss = [&] {
    const Tensor y = ssm_naive_oracle(x, Bi, Ci, dt, params);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * up[i];
    return acc;
  };
  const SSDGradients g = ssd_backward(x, Bi, Ci, dt, params, up);
  const double h = 1e-5;
  double worst = 0.0;
  auto check_group = [&](Tensor& param, const Tensor& analytic) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double orig = param[i];
      param[i] = orig + h;
      const double lp = loss();
      param[i] = orig - h;
      const double lm = loss();
      param[i] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      worst = std::max(worst, std::abs(analytic[i] - fd) /
                                  std::max(std::abs(analytic[i]) + std::abs(fd), 1e-6));
    }
  };
  check_group(x, g.x);
  check_group(Bi, g.B_in);
  check_group(Ci, g.C_in);
  check_group(dt, g.dt_raw);
  check_group(params.A_log, g.A_log);
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "max relative error " << worst << ", " << secs << " s";
  c.detail = d.str();
  c.require(worst < 1e-6, c.detail);
  c.require(secs < 30.0, c.detail);
  return c;
}

// ---------------------------------------------------------------- criterion 3
Check ssd_bench_via_cli(const fs::path& artifacts) {
  Check c;
  const auto t0 = clock_t_::now();
  const fs::path report = artifacts / "ssd_bench.json";
  const std::string cmd = std::string(SFD_CLI_PATH) + " ssd-bench --L 4096 --repeat 3 --out " +
                          report.string() + " > /dev/null";
  const int rc = std::system(cmd.c_str());
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "exit " << rc << ", report " << report.string() << ", " << secs << " s";
  c.detail = d.str();
  c.require(rc == 0, c.detail);
  c.require(fs::exists(report), c.detail);
  c.require(secs < 60.0, c.detail);
  return c;
}

// ---------------------------------------------------------------- criterion 4
Check wavelet_exactness() {
  Check c;
  std::mt19937_64 rng(7);
  {
    const Tensor x = random_uniform({2, 3, 16, 12}, rng, -2.0, 2.0);
    const HaarBands b = haar_wt(x);
    c.require(max_abs_diff(haar_iwt(b), x) <= 1e-12, "round trip above 1e-12");
    auto energy = [](const Tensor& t) {
      double e = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) e += t[i] * t[i];
      return e;
    };
    const double drift = std::abs(energy(x) - energy(b.ll) - energy(b.lh) - energy(b.hl) -
                                  energy(b.hh));
    c.require(drift <= 1e-10, "energy drift above 1e-10");
  }
  {
    const Tensor x = random_uniform({1, 2, 8, 8}, rng);
    const PHFPParams delta = phfp_delta_params(2, 1);
    c.require(max_abs_diff(phfp_forward(x, delta), 2.0 * x) <= 1e-10,
              "delta kernels do not double the input");
  }
  {
    const PHFPParams params = phfp_random_params(1, 2, rng);
    std::vector<std::vector<double>> M(64, std::vector<double>(64, 0.0));
    for (std::size_t j = 0; j < 64; ++j) {
      Tensor e = Tensor::zeros({1, 1, 8, 8});
      e[j] = 1.0;
      const Tensor col = phfp_forward(e, params);
      for (std::size_t i = 0; i < 64; ++i) M[i][j] = col[i];
    }
    const Tensor x = random_uniform({1, 1, 8, 8}, rng);
    const Tensor got = phfp_forward(x, params);
    double worst = 0.0;
    for (std::size_t i = 0; i < 64; ++i) {
      double want = 0.0;
      for (std::size_t j = 0; j < 64; ++j) want += M[i][j] * x[j];
      worst = std::max(worst, std::abs(got[i] - want));
    }
    c.require(worst <= 1e-9, "impulse-response oracle deviation above 1e-9");
  }
  if (c.ok) c.detail = "identity/Parseval/delta/impulse all within tolerance";
  return c;
}

// ---------------------------------------------------------------- criterion 5
Check case_behavior() {
  Check c;
  VesselnessConfig vcfg;
  const auto specs = phantom_corpus("tubes", 21, 10);

  // Contrast: fused response on centerline pixels vs background mean.
  double worst_ratio = 1e18;
  for (const PhantomSpec& spec : specs) {
    const PhantomSample s = render_phantom(spec);
    const VesselnessField f = case_forward(s.image, vcfg);
    double cl_sum = 0.0, bg_sum = 0.0;
    std::size_t cl_n = 0, bg_n = 0;
    for (const auto& line : s.truth.centerlines) {
      for (const auto& p : line) {
        cl_sum += f.fused.at(static_cast<std::size_t>(std::lround(p[0])),
                             static_cast<std::size_t>(std::lround(p[1])));
        ++cl_n;
      }
    }
    for (std::size_t i = 0; i < f.fused.size(); ++i) {
      if (s.truth.mask[i] == 0.0) {
        bg_sum += f.fused[i];
        ++bg_n;
      }
    }
    const double bg = bg_sum / static_cast<double>(bg_n);
    const double ratio = (cl_sum / static_cast<double>(cl_n)) / std::max(bg, 1e-12);
    worst_ratio = std::min(worst_ratio, ratio);
  }
  {
    std::ostringstream d;
    d << "min centerline/background ratio " << worst_ratio;
    c.require(worst_ratio >= 5.0, d.str());
  }

  // Scale selectivity: the responding sigma grows with tube width.
  auto argmax_sigma = [&](double radius) {
    PhantomSpec spec;
    Branch b;
    b.control = {{{32.0, 6.0}}, {{32.0, 57.0}}};
    b.radius_px = radius;
    spec.branches.push_back(b);
    const PhantomSample s = render_phantom(spec);
    const VesselnessField f = case_forward(s.image, vcfg);
    std::size_t best = 0;
    double best_mean = -1.0;
    for (std::size_t k = 0; k < f.per_scale.size(); ++k) {
      double mean = 0.0;
      for (std::size_t col = 10; col <= 53; ++col) mean += f.per_scale[k].at(32, col);
      if (mean > best_mean) {
        best_mean = mean;
        best = k;
      }
    }
    return vcfg.sigmas[best];
  };
  const double sigma_thin = argmax_sigma(1.5), sigma_wide = argmax_sigma(4.5);
  {
    std::ostringstream d;
    d << "argmax sigma " << sigma_thin << " (width 3) vs " << sigma_wide << " (width 9)";
    c.require(sigma_thin == 1.0 && sigma_wide == 3.0, d.str());
  }

  // Constant image -> zero response everywhere.
  {
    const VesselnessField f = case_forward(Tensor::full({32, 32}, 0.4), vcfg);
    double mx = 0.0;
    for (std::size_t i = 0; i < f.fused.size(); ++i) mx = std::max(mx, std::abs(f.fused[i]));
    c.require(mx == 0.0, "constant image produced a non-zero response");
  }

  // Intensity-scale invariance of the argmax pixel with automatic c.
  {
    const PhantomSample s = render_phantom(specs[2]);
    const VesselnessField base = case_forward(s.image, vcfg);
    std::size_t base_arg = 0;
    for (std::size_t i = 0; i < base.fused.size(); ++i) {
      if (base.fused[i] > base.fused[base_arg]) base_arg = i;
    }
    for (double alpha : {0.5, 2.0, 10.0}) {
      Tensor scaled = s.image;
      for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] *= alpha;
      const VesselnessField f = case_forward(scaled, vcfg);
      std::size_t arg = 0;
      for (std::size_t i = 0; i < f.fused.size(); ++i) {
        if (f.fused[i] > f.fused[arg]) arg = i;
      }
      // Accept an index swap only between numerically tied maxima.
      const bool same = arg == base_arg ||
                        std::abs(f.fused[base_arg] - f.fused[arg]) < 1e-9;
      std::ostringstream d;
      d << "argmax moved under intensity scale " << alpha;
      c.require(same, d.str());
    }
  }
  if (c.ok) {
    std::ostringstream d;
    d << "contrast ratio " << worst_ratio << ", scale selection 1->3, invariances hold";
    c.detail = d.str();
  }
  return c;
}

// ---------------------------------------------------------------- criterion 6
// Straight-line re-composition of the forward pass from module primitives,
// written without the library's orchestration code.
namespace ref {

Tensor cbl(const Tensor& x, const WeightStore& w, const std::string& conv,
           const std::string& bn, std::size_t stride, double slope) {
  const Tensor& bias = w.get(conv + ".bias");
  Tensor y = conv2d(x, w.get(conv + ".weight"), &bias, stride, 1);
  y = batch_norm_inference(y, w.get(bn + ".mean"), w.get(bn + ".var"), w.get(bn + ".gamma"),
                           w.get(bn + ".beta"));
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0) y[i] *= slope;
  }
  return y;
}

Tensor enc(const Tensor& x, const WeightStore& w, const std::string& p, double slope) {
  return cbl(cbl(x, w, p + ".conv1", p + ".bn1", 1, slope), w, p + ".conv2", p + ".bn2", 1,
             slope);
}

Tensor attention(const Tensor& f, const Tensor& w1, const Tensor& w2) {
  const std::size_t B = f.dim(0), C = f.dim(1), HW = f.dim(2) * f.dim(3);
  Tensor out = f;
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> gap(C, 0.0);
    for (std::size_t ch = 0; ch < C; ++ch) {
      for (std::size_t i = 0; i < HW; ++i) gap[ch] += f.data()[(b * C + ch) * HW + i];
      gap[ch] /= static_cast<double>(HW);
    }
    std::vector<double> hid(w1.dim(0), 0.0);
    for (std::size_t o = 0; o < w1.dim(0); ++o) {
      for (std::size_t i = 0; i < C; ++i) hid[o] += w1.at(o, i) * gap[i];
      hid[o] = std::max(hid[o], 0.0);
    }
    for (std::size_t ch = 0; ch < C; ++ch) {
      double s = 0.0;
      for (std::size_t o = 0; o < w2.dim(1); ++o) s += w2.at(ch, o) * hid[o];
      s = 1.0 / (1.0 + std::exp(-s));
      for (std::size_t i = 0; i < HW; ++i) out.data()[(b * C + ch) * HW + i] *= s;
    }
  }
  return out;
}

DSMamba2Params load_ds(const WeightStore& w, const std::string& prefix,
                       const NetworkConfig& cfg) {
  DSMamba2Params p;
  p.lin_in = w.get(prefix + ".lin_in.weight");
  p.lin_out = w.get(prefix + ".lin_out.weight");
  Mamba2BlockParams* streams[2] = {&p.fwd, &p.bwd};
  const char* names[2] = {"fwd", "bwd"};
  for (int s = 0; s < 2; ++s) {
    Mamba2BlockParams& blk = *streams[s];
    blk.d_model = cfg.mamba_d_model;
    blk.d_inner = cfg.mamba_heads * cfg.mamba_head_dim;
    blk.k_conv = cfg.mamba_k_conv;
    blk.ssd.n_heads = cfg.mamba_heads;
    blk.ssd.head_dim = cfg.mamba_head_dim;
    blk.ssd.state_dim = cfg.mamba_state;
    blk.ssd.chunk_size = cfg.mamba_chunk;
    const std::string key = prefix + "." + names[s];
    blk.in_proj = w.get(key + ".in_proj.weight");
    blk.conv1d = w.get(key + ".conv1d.weight");
    blk.norm_gamma = w.get(key + ".norm.gamma");
    blk.out_proj = w.get(key + ".out_proj.weight");
    blk.ssd.A_log = w.get(key + ".A_log");
    blk.ssd.dt_bias = w.get(key + ".dt_bias");
    blk.ssd.D = w.get(key + ".D");
  }
  return p;
}

// Row/column sequence views written as plain loops.
Tensor ds_over_rows(const Tensor& t, const DSMamba2Params& p) {
  const std::size_t B = t.dim(0), C = t.dim(1), H = t.dim(2), W = t.dim(3);
  Tensor seq({B * H, C, W});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < C; ++ch)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w2 = 0; w2 < W; ++w2) seq.at(b * H + h, ch, w2) = t.at(b, ch, h, w2);
  const Tensor y = ds_mamba2_forward(seq, p);
  Tensor out({B, y.dim(1), H, W});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < y.dim(1); ++ch)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w2 = 0; w2 < W; ++w2) out.at(b, ch, h, w2) = y.at(b * H + h, ch, w2);
  return out;
}

Tensor ds_over_cols(const Tensor& t, const DSMamba2Params& p) {
  const std::size_t B = t.dim(0), C = t.dim(1), H = t.dim(2), W = t.dim(3);
  Tensor seq({B * W, C, H});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < C; ++ch)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w2 = 0; w2 < W; ++w2) seq.at(b * W + w2, ch, h) = t.at(b, ch, h, w2);
  const Tensor y = ds_mamba2_forward(seq, p);
  Tensor out({B, y.dim(1), H, W});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t ch = 0; ch < y.dim(1); ++ch)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w2 = 0; w2 < W; ++w2) out.at(b, ch, h, w2) = y.at(b * W + w2, ch, h);
  return out;
}

Tensor phfp(const Tensor& y, const WeightStore& w, const std::string& prefix,
            std::size_t max_depth) {
  const std::size_t depth = phfp_max_depth(y.dim(2), y.dim(3), max_depth);
  PHFPParams p;
  p.depth = depth;
  for (std::size_t j = 1; j <= depth; ++j) {
    const std::string lk = prefix + ".level" + std::to_string(j);
    p.levels.push_back(
        {w.get(lk + ".lh.kernel"), w.get(lk + ".hl.kernel"), w.get(lk + ".hh.kernel")});
  }
  p.direct = w.get(prefix + ".direct.kernel");
  return depthwise_conv2d(y, p.direct) + phfp_reconstruct(phfp_decompose(y, depth), p);
}

Tensor dec(const Tensor& d_next, const Tensor& e_skip, const WeightStore& w,
           const std::string& p, const NetworkConfig& cfg) {
  const Tensor up = conv2d(nearest_upsample(d_next, 2), w.get(p + ".up.weight"), nullptr, 1, 0);
  Tensor y = phfp(concat_channels(up, e_skip), w, p + ".phfp", cfg.phfp_depth);
  y = cbl(y, w, p + ".conv1", p + ".bn1", 1, cfg.leaky_slope);
  return cbl(y, w, p + ".conv2", p + ".bn2", 1, cfg.leaky_slope);
}

Tensor forward(const Tensor& image, const WeightStore& w, const NetworkConfig& cfg,
               Check& c) {
  const std::size_t B = image.dim(0), H = image.dim(2), W = image.dim(3);
  const double slope = cfg.leaky_slope;
  auto shape_is = [&](const Tensor& t, std::size_t ch, std::size_t sp, const char* stage) {
    c.require(t.dim(1) == ch && t.dim(2) == sp && t.dim(3) == sp,
              std::string("stage shape mismatch at ") + stage);
  };

  const Tensor e1 = enc(image, w, "enc1", slope);
  shape_is(e1, 16, 64, "enc1");
  const std::size_t K = cfg.case_channels();
  Tensor maps({B, K, H, W});
  for (std::size_t b = 0; b < B; ++b) {
    Tensor sample({H, W});
    for (std::size_t i = 0; i < H * W; ++i) sample[i] = image.data()[b * H * W + i];
    const VesselnessField field = case_forward(sample, cfg.case_cfg);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < H * W; ++i)
        maps.data()[(b * K + k) * H * W + i] = field.per_scale[k][i];
  }
  const Tensor fused =
      attention(concat_channels(e1, maps), w.get("case.attn.w1"), w.get("case.attn.w2"));

  Tensor x = cbl(fused, w, "down1.conv", "down1.bn", 2, slope);
  const Tensor e2 = enc(x, w, "enc2", slope);
  shape_is(e2, 32, 32, "enc2");
  x = cbl(e2, w, "down2.conv", "down2.bn", 2, slope);
  const Tensor e3 = enc(x, w, "enc3", slope);
  shape_is(e3, 64, 16, "enc3");
  x = cbl(e3, w, "down3.conv", "down3.bn", 2, slope);
  const Tensor e4 = enc(x, w, "enc4", slope);
  shape_is(e4, 128, 8, "enc4");
  x = cbl(e4, w, "down4.conv", "down4.bn", 2, slope);
  const Tensor e5 = enc(x, w, "enc5", slope);
  shape_is(e5, 256, 4, "enc5");

  const Tensor y1 = ds_over_cols(
      ds_over_rows(e5, load_ds(w, "bottleneck.aads.path1.ds1", cfg)),
      load_ds(w, "bottleneck.aads.path1.ds2", cfg));
  const Tensor y2 = ds_over_rows(
      ds_over_cols(e5, load_ds(w, "bottleneck.aads.path2.ds1", cfg)),
      load_ds(w, "bottleneck.aads.path2.ds2", cfg));
  Tensor d = conv2d(concat_channels(y1, y2), w.get("bottleneck.fuse.weight"), nullptr, 1, 0);
  shape_is(d, 256, 4, "bottleneck");

  d = dec(d, e4, w, "dec4", cfg);
  shape_is(d, 128, 8, "dec4");
  d = dec(d, e3, w, "dec3", cfg);
  shape_is(d, 64, 16, "dec3");
  d = dec(d, e2, w, "dec2", cfg);
  shape_is(d, 32, 32, "dec2");
  d = dec(d, e1, w, "dec1", cfg);
  shape_is(d, 16, 64, "dec1");

  const Tensor& hb = w.get("head.bias");
  Tensor logits = conv2d(d, w.get("head.weight"), &hb, 1, 0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    logits[i] = 1.0 / (1.0 + std::exp(-logits[i]));
  }
  return logits;
}

}  // namespace ref

Check network_shape_determinism() {
  Check c;
  NetworkConfig cfg;
  const WeightStore w = init_network_weights(cfg);
  const auto specs = phantom_corpus("mixed", 31, 1);
  const PhantomSample s = render_phantom(specs[0]);
  Tensor img({1, 1, 64, 64});
  for (std::size_t i = 0; i < s.image.size(); ++i) img[i] = s.image[i];

  const SegmentationOutput a = network_forward(img, w, cfg);
  c.require(a.prob.shape() == std::vector<std::size_t>{1, 1, 64, 64}, "bad output shape");
  for (std::size_t i = 0; i < a.prob.size(); ++i) {
    if (a.prob[i] <= 0.0 || a.prob[i] >= 1.0) {
      c.require(false, "probability outside (0,1)");
      break;
    }
  }
  const SegmentationOutput b = network_forward(img, w, cfg);
  c.require(max_abs_diff(a.prob, b.prob) == 0.0, "reruns not bit-identical");

  const Tensor r = ref::forward(img, w, cfg, c);
  const double dev = max_abs_diff(r, a.prob);
  double checksum = 0.0;
  for (std::size_t i = 0; i < a.prob.size(); ++i) checksum += a.prob[i];
  std::ostringstream d;
  d << "reference deviation " << dev << ", probability-sum checksum " << checksum;
  c.require(dev < 1e-8, d.str());
  if (c.ok) c.detail = d.str();
  return c;
}

// ---------------------------------------------------------------- criterion 7
Check stenosis_round_trip() {
  Check c;
  const auto t0 = clock_t_::now();
  const auto specs = phantom_corpus("stenoses", 13, 32);
  DetectionConfig cfg;
  MatchResult total;
  std::vector<MatchResult::Pair> pairs;
  for (const PhantomSpec& spec : specs) {
    const PhantomSample s = render_phantom(spec);
    CenterlineGraph g = decompose_segments(skeletonize(s.truth.mask));
    diameter_map(g, s.truth.mask, cfg.spacing_mm);
    const auto pts = detect_stenosis(g, cfg);
    std::vector<StenosisPoint> gt;
    for (const PhantomGtStenosis& t : s.truth.stenoses) {
      StenosisPoint p;
      p.row = t.row;
      p.col = t.col;
      p.severity = t.severity;
      p.grade = grade_from_severity(t.severity);
      gt.push_back(p);
    }
    const MatchResult m = match_ground_truth(pts, gt, cfg.radius_px);
    total.tp += m.tp;
    total.fp += m.fp;
    total.fn += m.fn;
    for (const auto& pr : m.pairs) {
      pairs.push_back(pr);
      std::ostringstream d;
      d << "severity error " << std::abs(pr.b_pred - pr.b_gt) << " for programmed "
        << pr.b_gt;
      c.require(std::abs(pr.b_pred - pr.b_gt) <= 0.10, d.str());
      c.require(grade_from_severity(pr.b_pred) == grade_from_severity(pr.b_gt),
                "grade mismatch for programmed " + std::to_string(pr.b_gt));
    }
    c.require(m.fn == 0, "missed a programmed lesion");
    c.require(m.fp == 0, "spurious detection on a clean phantom");
  }
  total.pairs = pairs;
  const DetectionMetrics dm = detection_metrics(total);
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "TPR " << dm.tpr << ", PPV " << dm.ppv << ", ARMSE " << dm.armse << ", RRMSE "
    << dm.rrmse << ", " << secs << " s";
  if (c.ok) c.detail = d.str();
  c.require(dm.tpr_defined && dm.tpr == 1.0, d.str());
  c.require(dm.ppv_defined && dm.ppv == 1.0, d.str());
  c.require(dm.armse_defined && dm.armse <= 0.10, d.str());
  c.require(dm.rrmse_defined && dm.rrmse <= 0.30, d.str());
  c.require(secs < 60.0, d.str());
  return c;
}

// ---------------------------------------------------------------- criterion 8
Check metric_fixtures() {
  Check c;
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const ConfusionCounts cc{rng() % 40, rng() % 40, rng() % 40, rng() % 40};
    const OverlapMetrics m = overlap_metrics(cc);
    c.require(std::abs(m.dice - m.f1) <= 1e-12, "Dice/F1 identity broken");
  }
  {
    const Tensor pred({2, 2}, {1.0, 1.0, 0.0, 0.0});
    const Tensor gt({2, 2}, {1.0, 0.0, 1.0, 0.0});
    const ConfusionCounts cc = confusion(pred, gt);
    c.require(cc.tp == 1 && cc.fp == 1 && cc.fn == 1 && cc.tn == 1,
              "hand-counted confusion fixture mismatch");
  }
  {
    std::vector<std::pair<std::size_t, std::size_t>> a, b;
    for (std::size_t col = 0; col < 10; ++col) {
      a.emplace_back(1, col);
      b.emplace_back(4, col);
    }
    c.require(hd95(a, b).value == 3.0 && assd(a, b).value == 3.0,
              "parallel-line fixture not exactly 3");
  }
  for (int trial = 0; trial < 6; ++trial) {
    std::vector<std::pair<std::size_t, std::size_t>> a, b;
    const std::size_t na = 5 + rng() % 45, nb = 5 + rng() % 45;
    while (a.size() < na) a.emplace_back(rng() % 40, rng() % 40);
    while (b.size() < nb) b.emplace_back(rng() % 40, rng() % 40);
    auto directed = [](const auto& from, const auto& to) {
      std::vector<double> out;
      for (const auto& p : from) {
        double best = 1e18;
        for (const auto& q : to) {
          const double dr = double(p.first) - double(q.first);
          const double dc = double(p.second) - double(q.second);
          best = std::min(best, std::sqrt(dr * dr + dc * dc));
        }
        out.push_back(best);
      }
      return out;
    };
    const std::vector<double> da = directed(a, b), db = directed(b, a);
    double sum = 0.0;
    for (double v : da) sum += v;
    for (double v : db) sum += v;
    c.require(assd(a, b).value == sum / static_cast<double>(na + nb),
              "assd differs from the all-pairs oracle");
    c.require(hd95(a, b).value ==
                  std::max(percentile(da, 95.0), percentile(db, 95.0)),
              "hd95 differs from the all-pairs oracle");
  }
  if (c.ok) c.detail = "identity, confusion, and surface-distance oracles all exact";
  return c;
}

// ---------------------------------------------------------------- criterion 9
Check topology_suite() {
  Check c;
  auto count_components = [](const Tensor& m) {
    const long H = static_cast<long>(m.dim(0)), W = static_cast<long>(m.dim(1));
    std::vector<bool> seen(m.size(), false);
    std::size_t n = 0;
    for (long r = 0; r < H; ++r)
      for (long col = 0; col < W; ++col) {
        const std::size_t idx = static_cast<std::size_t>(r * W + col);
        if (m[idx] == 0.0 || seen[idx]) continue;
        ++n;
        std::vector<std::pair<long, long>> stack{{r, col}};
        seen[idx] = true;
        while (!stack.empty()) {
          auto [cr, cc] = stack.back();
          stack.pop_back();
          for (long dr = -1; dr <= 1; ++dr)
            for (long dc = -1; dc <= 1; ++dc) {
              const long nr = cr + dr, nc = cc + dc;
              if (nr < 0 || nc < 0 || nr >= H || nc >= W) continue;
              const std::size_t ni = static_cast<std::size_t>(nr * W + nc);
              if (m[ni] != 0.0 && !seen[ni]) {
                seen[ni] = true;
                stack.emplace_back(nr, nc);
              }
            }
        }
      }
    return n;
  };

  for (const char* preset : {"tubes", "bifurcations", "stenoses", "mixed"}) {
    const auto specs = phantom_corpus(preset, 29, 8);
    for (const PhantomSpec& spec : specs) {
      const PhantomSample s = render_phantom(spec);
      const Tensor skel = skeletonize(s.truth.mask);
      bool thick = false;
      for (std::size_t r = 0; r + 1 < skel.dim(0) && !thick; ++r)
        for (std::size_t col = 0; col + 1 < skel.dim(1); ++col) {
          if (skel.at(r, col) != 0.0 && skel.at(r, col + 1) != 0.0 &&
              skel.at(r + 1, col) != 0.0 && skel.at(r + 1, col + 1) != 0.0) {
            thick = true;
            break;
          }
        }
      c.require(!thick, std::string("2x2 block in a ") + preset + " skeleton");
      c.require(count_components(skel) == count_components(s.truth.mask),
                std::string("component count changed on a ") + preset + " phantom");
    }
  }

  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t h = 8 + rng() % 25, w = 8 + rng() % 25;
    Tensor m({h, w});
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = (rng() % 100 < 70) ? 1.0 : 0.0;
    const Tensor fast = euclidean_distance_transform(m);
    bool exact = true;
    for (long r = 0; r < static_cast<long>(h) && exact; ++r)
      for (long col = 0; col < static_cast<long>(w); ++col) {
        if (m.at(r, col) == 0.0) continue;
        double best = std::min({r + 1, col + 1, static_cast<long>(h) - r,
                                static_cast<long>(w) - col});
        best *= best;
        for (long rr = 0; rr < static_cast<long>(h); ++rr)
          for (long cc = 0; cc < static_cast<long>(w); ++cc) {
            if (m.at(rr, cc) != 0.0) continue;
            best = std::min(best,
                            double((r - rr) * (r - rr) + (col - cc) * (col - cc)));
          }
        if (fast.at(r, col) != std::sqrt(best)) {
          exact = false;
          break;
        }
      }
    c.require(exact, "EDT deviated from the quadratic oracle");
  }
  if (c.ok) c.detail = "thin skeletons, preserved connectivity, exact distances";
  return c;
}

// --------------------------------------------------------------- criterion 10
bool files_identical(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  return sa.str() == sb.str();
}

Check end_to_end_cli(const fs::path& work) {
  Check c;
  const auto t0 = clock_t_::now();
  const std::string cli = SFD_CLI_PATH;

  auto run_pipeline = [&](const fs::path& dir) {
    fs::create_directories(dir);
    const fs::path corpus = dir / "corpus";
    std::vector<std::string> cmds = {
        cli + " phantom-gen --preset stenoses --seed 3 --count 4 --out " + corpus.string(),
        cli + " forward --input " + (corpus / "stenoses_000.png").string() + " --seed 1" +
            " --out-prob " + (dir / "prob.png").string() + " --out-mask " +
            (dir / "pred_mask.png").string() + " --save-weights " +
            (dir / "weights.sfdw").string(),
        cli + " detect --mask " + (corpus / "stenoses_000_mask.png").string() + " --gt " +
            (corpus / "stenoses_000_truth.json").string() + " --out " +
            (dir / "detect.json").string(),
        cli + " evaluate --pred " + (dir / "pred_mask.png").string() + " --gt " +
            (corpus / "stenoses_000_mask.png").string() + " --out " +
            (dir / "seg_eval.json").string(),
    };
    for (const std::string& cmd : cmds) {
      if (std::system((cmd + " > /dev/null").c_str()) != 0) return false;
    }
    return true;
  };

  const fs::path r1 = work / "run1", r2 = work / "run2";
  c.require(run_pipeline(r1), "first pipeline run failed");
  c.require(run_pipeline(r2), "second pipeline run failed");
  if (c.ok) {
    std::size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(r1)) {
      if (!e.is_regular_file()) continue;
      const fs::path rel = fs::relative(e.path(), r1);
      ++compared;
      if (!files_identical(e.path(), r2 / rel)) {
        c.require(false, "artifact differs between runs: " + rel.string());
        break;
      }
    }
    c.require(compared >= 16, "unexpectedly few artifacts produced");
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << compared << " artifacts byte-identical across runs, " << secs << " s";
    if (c.ok) c.detail = d.str();
    c.require(secs < 300.0, d.str());
  }
  return c;
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "sfd_acceptance";
  std::error_code ec;
  fs::remove_all(work, ec);
  fs::create_directories(work);
  const fs::path artifacts = "acceptance_artifacts";
  fs::create_directories(artifacts);

  std::vector<std::pair<std::string, Check>> results;
  results.emplace_back("scan matches the sequential oracle", ssd_oracle_equivalence());
  results.emplace_back("scan gradients match finite differences", ssd_gradient_check());
  results.emplace_back("chunked scan benchmark (CLI)", ssd_bench_via_cli(artifacts));
  results.emplace_back("wavelet exactness bundle", wavelet_exactness());
  results.emplace_back("vesselness behavior on tube phantoms", case_behavior());
  results.emplace_back("network shape, determinism, reference parity",
                       network_shape_determinism());
  results.emplace_back("stenosis quantification round trip", stenosis_round_trip());
  results.emplace_back("segmentation metric fixtures", metric_fixtures());
  results.emplace_back("skeleton/distance topology suite", topology_suite());
  results.emplace_back("end-to-end CLI pipeline", end_to_end_cli(work));

  bool all_ok = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& [name, check] = results[i];
    std::printf("[%s] %2zu %s%s%s\n", check.ok ? "PASS" : "FAIL", i + 1, name.c_str(),
                check.detail.empty() ? "" : " — ", check.detail.c_str());
    all_ok = all_ok && check.ok;
  }
  return all_ok ? 0 : 1;
}
