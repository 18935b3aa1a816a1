#include "sfd/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sfd/mamba2.hpp"
#include "sfd/nn_ops.hpp"
#include "sfd/wavelet.hpp"

namespace sfd {

void NetworkConfig::validate() const {
  if (input_size % 16 != 0) {
    throw std::invalid_argument("NetworkConfig: input size must be divisible by 16");
  }
  for (std::size_t i = 1; i < stage_channels.size(); ++i) {
    if (stage_channels[i] <= stage_channels[i - 1]) {
      throw std::invalid_argument("NetworkConfig: stage channels must be strictly increasing");
    }
  }
  if (mamba_heads * mamba_head_dim != 2 * mamba_d_model) {
    throw std::invalid_argument("NetworkConfig: mamba d_inner must equal 2*d_model");
  }
  case_cfg.validate();
}

Tensor SegmentationOutput::mask() const {
  Tensor m = prob;
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = m[i] >= threshold ? 1.0 : 0.0;
  return m;
}

static Tensor cbl(const Tensor& x, const WeightStore& w, const std::string& conv_key,
                  const std::string& bn_key, std::size_t stride, double slope) {
  const Tensor& bias = w.get(conv_key + ".bias");
  Tensor y = conv2d(x, w.get(conv_key + ".weight"), &bias, stride, 1);
  y = batch_norm_inference(y, w.get(bn_key + ".mean"), w.get(bn_key + ".var"),
                           w.get(bn_key + ".gamma"), w.get(bn_key + ".beta"));
  return leaky_relu(y, slope);
}

Tensor encoder_block(const Tensor& x, const WeightStore& weights, const std::string& prefix,
                     double leaky_slope) {
  Tensor y = cbl(x, weights, prefix + ".conv1", prefix + ".bn1", 1, leaky_slope);
  return cbl(y, weights, prefix + ".conv2", prefix + ".bn2", 1, leaky_slope);
}

Tensor downsample(const Tensor& e, const WeightStore& weights, const std::string& prefix,
                  double leaky_slope) {
  if (e.dim(2) % 2 != 0 || e.dim(3) % 2 != 0) {
    throw std::invalid_argument("downsample: spatial dims must be even");
  }
  return cbl(e, weights, prefix + ".conv", prefix + ".bn", 2, leaky_slope);
}

static PHFPParams load_phfp(const WeightStore& w, const std::string& prefix,
                            std::size_t depth) {
  PHFPParams p;
  p.depth = depth;
  for (std::size_t j = 1; j <= depth; ++j) {
    const std::string lk = prefix + ".level" + std::to_string(j);
    p.levels.push_back({w.get(lk + ".lh.kernel"), w.get(lk + ".hl.kernel"),
                        w.get(lk + ".hh.kernel")});
  }
  p.direct = w.get(prefix + ".direct.kernel");
  return p;
}

Tensor decoder_stage(const Tensor& d_next, const Tensor& e_skip, const WeightStore& weights,
                     const std::string& prefix, const NetworkConfig& cfg) {
  if (d_next.dim(2) * 2 != e_skip.dim(2) || d_next.dim(3) * 2 != e_skip.dim(3)) {
    throw std::invalid_argument("decoder_stage: skip spatial size must be twice the input");
  }
  const Tensor up = conv2d(nearest_upsample(d_next, 2), weights.get(prefix + ".up.weight"),
                           nullptr, 1, 0);
  Tensor y = concat_channels(up, e_skip);
  const std::size_t depth = phfp_max_depth(y.dim(2), y.dim(3), cfg.phfp_depth);
  y = phfp_forward(y, load_phfp(weights, prefix + ".phfp", depth));
  y = cbl(y, weights, prefix + ".conv1", prefix + ".bn1", 1, cfg.leaky_slope);
  return cbl(y, weights, prefix + ".conv2", prefix + ".bn2", 1, cfg.leaky_slope);
}

static DSMamba2Params load_ds(const WeightStore& w, const std::string& prefix,
                              const NetworkConfig& cfg) {
  DSMamba2Params p;
  p.lin_in = w.get(prefix + ".lin_in.weight");
  p.lin_out = w.get(prefix + ".lin_out.weight");
  for (const char* stream : {"fwd", "bwd"}) {
    Mamba2BlockParams blk;
    blk.d_model = cfg.mamba_d_model;
    blk.d_inner = cfg.mamba_heads * cfg.mamba_head_dim;
    blk.k_conv = cfg.mamba_k_conv;
    blk.ssd.n_heads = cfg.mamba_heads;
    blk.ssd.head_dim = cfg.mamba_head_dim;
    blk.ssd.state_dim = cfg.mamba_state;
    blk.ssd.chunk_size = cfg.mamba_chunk;
    const std::string s = prefix + "." + stream;
    blk.in_proj = w.get(s + ".in_proj.weight");
    blk.conv1d = w.get(s + ".conv1d.weight");
    blk.norm_gamma = w.get(s + ".norm.gamma");
    blk.out_proj = w.get(s + ".out_proj.weight");
    blk.ssd.A_log = w.get(s + ".A_log");
    blk.ssd.dt_bias = w.get(s + ".dt_bias");
    blk.ssd.D = w.get(s + ".D");
    if (std::string(stream) == "fwd") {
      p.fwd = blk;
    } else {
      p.bwd = blk;
    }
  }
  return p;
}

SegmentationOutput network_forward(const Tensor& image, const WeightStore& weights,
                                   const NetworkConfig& cfg) {
  cfg.validate();
  if (image.rank() != 4 || image.dim(1) != 1) {
    throw std::invalid_argument("network_forward: image must be [B,1,H,W]");
  }
  if (image.dim(2) != cfg.input_size || image.dim(3) != cfg.input_size) {
    throw std::invalid_argument("network_forward: wrong input size, expected " +
                                std::to_string(cfg.input_size));
  }
  const std::size_t B = image.dim(0), Hs = image.dim(2), Ws = image.dim(3);
  const double slope = cfg.leaky_slope;

  // Stage 1 + CASE priors.
  const Tensor e1 = encoder_block(image, weights, "enc1", slope);
  const std::size_t K = cfg.case_channels();
  Tensor case_maps({B, K, Hs, Ws});
  for (std::size_t b = 0; b < B; ++b) {
    Tensor sample({Hs, Ws});
    for (std::size_t i = 0; i < Hs * Ws; ++i) sample[i] = image.data()[b * Hs * Ws + i];
    const VesselnessField field = case_forward(sample, cfg.case_cfg);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t i = 0; i < Hs * Ws; ++i) {
        case_maps.data()[(b * K + k) * Hs * Ws + i] = field.per_scale[k][i];
      }
    }
  }
  Tensor fused = concat_channels(e1, case_maps);
  fused = channel_attention(fused, weights.get("case.attn.w1"), weights.get("case.attn.w2"));

  // Encoder stages 2..5.
  Tensor x = downsample(fused, weights, "down1", slope);
  const Tensor e2 = encoder_block(x, weights, "enc2", slope);
  x = downsample(e2, weights, "down2", slope);
  const Tensor e3 = encoder_block(x, weights, "enc3", slope);
  x = downsample(e3, weights, "down3", slope);
  const Tensor e4 = encoder_block(x, weights, "enc4", slope);
  x = downsample(e4, weights, "down4", slope);
  const Tensor e5 = encoder_block(x, weights, "enc5", slope);

  // Bottleneck: axial-alternating dual-stream Mamba2.
  AADSMamba2Params aads;
  aads.path1_ds1 = load_ds(weights, "bottleneck.aads.path1.ds1", cfg);
  aads.path1_ds2 = load_ds(weights, "bottleneck.aads.path1.ds2", cfg);
  aads.path2_ds1 = load_ds(weights, "bottleneck.aads.path2.ds1", cfg);
  aads.path2_ds2 = load_ds(weights, "bottleneck.aads.path2.ds2", cfg);
  aads.fuse_conv = weights.get("bottleneck.fuse.weight");
  Tensor d = aads_mamba2_forward(e5, aads);

  // Decoder stages 4..1, each with PHFP.
  d = decoder_stage(d, e4, weights, "dec4", cfg);
  d = decoder_stage(d, e3, weights, "dec3", cfg);
  d = decoder_stage(d, e2, weights, "dec2", cfg);
  d = decoder_stage(d, e1, weights, "dec1", cfg);

  const Tensor& head_bias = weights.get("head.bias");
  Tensor logits = conv2d(d, weights.get("head.weight"), &head_bias, 1, 0);

  SegmentationOutput out;
  out.prob = sigmoid(logits);
  out.threshold = cfg.threshold;
  return out;
}

double mse_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("mse_loss: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

namespace {

Tensor conv_init(std::size_t cout, std::size_t cin, std::size_t k, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(cin * k * k));
  return random_uniform({cout, cin, k, k}, rng, -s, s);
}

void put_cbl(WeightStore& w, const std::string& conv_key, const std::string& bn_key,
             std::size_t cout, std::size_t cin, std::mt19937_64& rng) {
  w.put(conv_key + ".weight", conv_init(cout, cin, 3, rng));
  w.put(conv_key + ".bias", Tensor::zeros({cout}));
  w.put(bn_key + ".mean", Tensor::zeros({cout}));
  w.put(bn_key + ".var", Tensor::full({cout}, 1.0));
  w.put(bn_key + ".gamma", Tensor::full({cout}, 1.0));
  w.put(bn_key + ".beta", Tensor::zeros({cout}));
}

void put_ds(WeightStore& w, const std::string& prefix, std::size_t c, const NetworkConfig& cfg,
            std::mt19937_64& rng) {
  DSMamba2Params p = init_ds_mamba2(c, c, cfg.mamba_d_model, cfg.mamba_heads,
                                    cfg.mamba_head_dim, cfg.mamba_state, cfg.mamba_chunk,
                                    cfg.mamba_k_conv, rng);
  w.put(prefix + ".lin_in.weight", p.lin_in);
  w.put(prefix + ".lin_out.weight", p.lin_out);
  for (const char* stream : {"fwd", "bwd"}) {
    const Mamba2BlockParams& blk = std::string(stream) == "fwd" ? p.fwd : p.bwd;
    const std::string s = prefix + "." + stream;
    w.put(s + ".in_proj.weight", blk.in_proj);
    w.put(s + ".conv1d.weight", blk.conv1d);
    w.put(s + ".norm.gamma", blk.norm_gamma);
    w.put(s + ".out_proj.weight", blk.out_proj);
    w.put(s + ".A_log", blk.ssd.A_log);
    w.put(s + ".dt_bias", blk.ssd.dt_bias);
    w.put(s + ".D", blk.ssd.D);
  }
}

}  // namespace

WeightStore init_network_weights(const NetworkConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  WeightStore w;
  const auto& c = cfg.stage_channels;
  const std::size_t K = cfg.case_channels();

  put_cbl(w, "enc1.conv1", "enc1.bn1", c[0], 1, rng);
  put_cbl(w, "enc1.conv2", "enc1.bn2", c[0], c[0], rng);
  for (std::size_t i = 2; i <= 5; ++i) {
    const std::string p = "enc" + std::to_string(i);
    put_cbl(w, p + ".conv1", p + ".bn1", c[i - 1], c[i - 1], rng);
    put_cbl(w, p + ".conv2", p + ".bn2", c[i - 1], c[i - 1], rng);
  }

  const std::size_t attn_c = c[0] + K;
  const std::size_t attn_h = std::max<std::size_t>(1, attn_c / cfg.attn_reduction);
  {
    const double s = 1.0 / std::sqrt(static_cast<double>(attn_c));
    w.put("case.attn.w1", random_uniform({attn_h, attn_c}, rng, -s, s));
    w.put("case.attn.w2", random_uniform({attn_c, attn_h}, rng, -s, s));
  }

  put_cbl(w, "down1.conv", "down1.bn", c[1], attn_c, rng);
  for (std::size_t i = 2; i <= 4; ++i) {
    put_cbl(w, "down" + std::to_string(i) + ".conv", "down" + std::to_string(i) + ".bn",
            c[i], c[i - 1], rng);
  }

  for (const char* path : {"path1", "path2"}) {
    for (const char* ds : {"ds1", "ds2"}) {
      put_ds(w, std::string("bottleneck.aads.") + path + "." + ds, c[4], cfg, rng);
    }
  }
  {
    const double s = 1.0 / std::sqrt(static_cast<double>(2 * c[4]));
    w.put("bottleneck.fuse.weight", random_uniform({c[4], 2 * c[4], 1, 1}, rng, -s, s));
  }

  std::size_t spatial = cfg.input_size / 8;  // decoder stage 4 works at H/8 after upsample
  for (std::size_t i = 4; i >= 1; --i) {
    const std::string p = "dec" + std::to_string(i);
    const std::size_t cs = c[i - 1];
    {
      const double s = 1.0 / std::sqrt(static_cast<double>(c[i]));
      w.put(p + ".up.weight", random_uniform({cs, c[i], 1, 1}, rng, -s, s));
    }
    const std::size_t depth = phfp_max_depth(spatial, spatial, cfg.phfp_depth);
    PHFPParams ph = phfp_random_params(2 * cs, depth, rng);
    for (std::size_t j = 1; j <= depth; ++j) {
      const std::string lk = p + ".phfp.level" + std::to_string(j);
      w.put(lk + ".lh.kernel", ph.levels[j - 1].lh);
      w.put(lk + ".hl.kernel", ph.levels[j - 1].hl);
      w.put(lk + ".hh.kernel", ph.levels[j - 1].hh);
    }
    w.put(p + ".phfp.direct.kernel", ph.direct);
    put_cbl(w, p + ".conv1", p + ".bn1", cs, 2 * cs, rng);
    put_cbl(w, p + ".conv2", p + ".bn2", cs, cs, rng);
    spatial *= 2;
  }

  {
    const double s = 1.0 / std::sqrt(static_cast<double>(c[0]));
    w.put("head.weight", random_uniform({1, c[0], 1, 1}, rng, -s, s));
    w.put("head.bias", Tensor::zeros({1}));
  }
  return w;
}

}  // namespace sfd
