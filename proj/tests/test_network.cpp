#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "sfd/network.hpp"
#include "sfd/nn_ops.hpp"
#include "sfd/phantom.hpp"
#include "sfd/wavelet.hpp"

using namespace sfd;

namespace {

Tensor phantom_input(std::uint64_t seed) {
  std::vector<PhantomSpec> specs = phantom_corpus("mixed", seed, 1);
  const PhantomSample s = render_phantom(specs[0]);
  Tensor img({1, 1, s.image.dim(0), s.image.dim(1)});
  for (std::size_t i = 0; i < s.image.size(); ++i) img[i] = s.image[i];
  return img;
}

}  // namespace

TEST_CASE("config validation") {
  NetworkConfig cfg;
  cfg.input_size = 60;  // not divisible by 16
  CHECK_THROWS(cfg.validate());
  cfg = NetworkConfig{};
  cfg.stage_channels = {16, 16, 64, 128, 256};
  CHECK_THROWS(cfg.validate());
  cfg = NetworkConfig{};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("encoder_block and downsample shape walk") {
  NetworkConfig cfg;
  WeightStore w = init_network_weights(cfg);
  std::mt19937_64 rng(1);
  Tensor x = random_uniform({1, 1, 64, 64}, rng, 0.0, 1.0);
  Tensor e1 = encoder_block(x, w, "enc1", cfg.leaky_slope);
  CHECK(e1.shape() == std::vector<std::size_t>{1, 16, 64, 64});

  // Stage-2 downsample halves the spatial extent and doubles the channels.
  Tensor attn_in = random_uniform({1, 19, 64, 64}, rng);  // 16 + 3 prior channels
  Tensor d1 = downsample(attn_in, w, "down1", cfg.leaky_slope);
  CHECK(d1.shape() == std::vector<std::size_t>{1, 32, 32, 32});

  Tensor odd = random_uniform({1, 19, 63, 63}, rng);
  CHECK_THROWS(downsample(odd, w, "down1", cfg.leaky_slope));
}

TEST_CASE("downsample equals stride-1 conv plus decimation") {
  NetworkConfig cfg;
  WeightStore w = init_network_weights(cfg);
  std::mt19937_64 rng(2);
  Tensor x = random_uniform({1, 64, 8, 8}, rng);
  Tensor got = downsample(x, w, "down3", cfg.leaky_slope);

  const Tensor& bias = w.get("down3.conv.bias");
  Tensor full = conv2d(x, w.get("down3.conv.weight"), &bias, 1, 1);
  Tensor dec({1, full.dim(1), 4, 4});
  for (std::size_t c = 0; c < full.dim(1); ++c)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) dec.at(0, c, i, j) = full.at(0, c, 2 * i, 2 * j);
  dec = leaky_relu(batch_norm_inference(dec, w.get("down3.bn.mean"), w.get("down3.bn.var"),
                                        w.get("down3.bn.gamma"), w.get("down3.bn.beta")),
                   cfg.leaky_slope);
  CHECK(max_abs_diff(got, dec) < 1e-12);
}

TEST_CASE("forward pass: shape, range, determinism") {
  NetworkConfig cfg;
  WeightStore w = init_network_weights(cfg);
  Tensor img = phantom_input(3);
  SegmentationOutput a = network_forward(img, w, cfg);
  CHECK(a.prob.shape() == std::vector<std::size_t>{1, 1, 64, 64});
  for (std::size_t i = 0; i < a.prob.size(); ++i) {
    CHECK(a.prob[i] > 0.0);
    CHECK(a.prob[i] < 1.0);
  }
  SegmentationOutput b = network_forward(img, w, cfg);
  CHECK(max_abs_diff(a.prob, b.prob) == 0.0);

  Tensor mask = a.mask();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    CHECK((mask[i] == 0.0 || mask[i] == 1.0));
    CHECK(mask[i] == (a.prob[i] >= 0.5 ? 1.0 : 0.0));
  }
}

TEST_CASE("zero head gives a constant 0.5 map") {
  NetworkConfig cfg;
  WeightStore w = init_network_weights(cfg);
  w.put("head.weight", Tensor::zeros({1, 16, 1, 1}));
  w.put("head.bias", Tensor::zeros({1}));
  SegmentationOutput out = network_forward(phantom_input(4), w, cfg);
  for (std::size_t i = 0; i < out.prob.size(); ++i) CHECK(out.prob[i] == 0.5);
}

TEST_CASE("missing weight keys are named") {
  NetworkConfig cfg;
  WeightStore w = init_network_weights(cfg);
  WeightStore partial;
  for (const std::string& name : w.names()) {
    if (name == "enc3.conv2.weight") continue;
    partial.put(name, w.get(name));
  }
  try {
    network_forward(phantom_input(5), partial, cfg);
    CHECK(false);
  } catch (const std::out_of_range& e) {
    CHECK(std::string(e.what()).find("enc3.conv2.weight") != std::string::npos);
  }
}

TEST_CASE("wrong input size is rejected") {
  NetworkConfig cfg;
  WeightStore w = init_network_weights(cfg);
  std::mt19937_64 rng(6);
  Tensor small = random_uniform({1, 1, 32, 32}, rng, 0.0, 1.0);
  CHECK_THROWS(network_forward(small, w, cfg));
}

TEST_CASE("decoder stage with delta-kernel refinement equals the 2x map") {
  // With delta kernels at depth 1, the refinement module doubles its input;
  // feed the stage both ways and compare.
  NetworkConfig cfg;
  WeightStore w = init_network_weights(cfg);
  std::mt19937_64 rng(7);
  Tensor d_next = random_uniform({1, 32, 16, 16}, rng);
  Tensor e_skip = random_uniform({1, 16, 32, 32}, rng);

  WeightStore w2;
  for (const std::string& name : w.names()) w2.put(name, w.get(name));
  const std::size_t depth = phfp_max_depth(32, 32, cfg.phfp_depth);
  PHFPParams delta = phfp_delta_params(32, 1);
  // Collapse to a depth-limited delta configuration: level 1 delta kernels,
  // deeper levels zeroed so only the depth-1 path remains... instead install a
  // full delta set at the stage's own depth and compare against the manual
  // computation below, which uses phfp_forward directly.
  PHFPParams full = phfp_delta_params(32, depth);
  for (std::size_t j = 1; j <= depth; ++j) {
    const std::string lk = "dec1.phfp.level" + std::to_string(j);
    w2.put(lk + ".lh.kernel", full.levels[j - 1].lh);
    w2.put(lk + ".hl.kernel", full.levels[j - 1].hl);
    w2.put(lk + ".hh.kernel", full.levels[j - 1].hh);
  }
  w2.put("dec1.phfp.direct.kernel", full.direct);
  Tensor got = decoder_stage(d_next, e_skip, w2, "dec1", cfg);

  const Tensor up = conv2d(nearest_upsample(d_next, 2), w2.get("dec1.up.weight"), nullptr, 1, 0);
  Tensor y = phfp_forward(concat_channels(up, e_skip), full);
  const Tensor& b1 = w2.get("dec1.conv1.bias");
  y = leaky_relu(batch_norm_inference(conv2d(y, w2.get("dec1.conv1.weight"), &b1, 1, 1),
                                      w2.get("dec1.bn1.mean"), w2.get("dec1.bn1.var"),
                                      w2.get("dec1.bn1.gamma"), w2.get("dec1.bn1.beta")),
                 cfg.leaky_slope);
  const Tensor& b2 = w2.get("dec1.conv2.bias");
  y = leaky_relu(batch_norm_inference(conv2d(y, w2.get("dec1.conv2.weight"), &b2, 1, 1),
                                      w2.get("dec1.bn2.mean"), w2.get("dec1.bn2.var"),
                                      w2.get("dec1.bn2.gamma"), w2.get("dec1.bn2.beta")),
                 cfg.leaky_slope);
  CHECK(max_abs_diff(got, y) < 1e-12);
  (void)delta;
}

TEST_CASE("mse_loss") {
  Tensor a({2}, {0.5, 1.0}), b({2}, {0.0, 1.0});
  CHECK(mse_loss(a, a) == 0.0);
  CHECK(mse_loss(Tensor::zeros({4}), Tensor::full({4}, 1.0)) == 1.0);
  CHECK(mse_loss(a, b) == doctest::Approx(0.125));
  CHECK_THROWS(mse_loss(a, Tensor::zeros({3})));
}

TEST_CASE("seeded weights are reproducible and cover the manifest") {
  NetworkConfig cfg;
  WeightStore a = init_network_weights(cfg);
  WeightStore b = init_network_weights(cfg);
  CHECK(a.names() == b.names());
  for (const std::string& n : a.names()) CHECK(max_abs_diff(a.get(n), b.get(n)) == 0.0);

  cfg.seed = 99;
  WeightStore c = init_network_weights(cfg);
  CHECK(max_abs_diff(a.get("enc1.conv1.weight"), c.get("enc1.conv1.weight")) > 0.0);

  for (const char* key :
       {"enc1.conv1.weight", "enc5.bn2.var", "down1.conv.weight", "case.attn.w1",
        "bottleneck.aads.path1.ds1.fwd.in_proj.weight", "bottleneck.aads.path2.ds2.bwd.D",
        "bottleneck.fuse.weight", "dec4.up.weight", "dec1.phfp.level1.lh.kernel",
        "dec1.phfp.direct.kernel", "dec2.conv1.weight", "head.weight", "head.bias"}) {
    CHECK(a.contains(key));
  }
}
