#include "sfd/mamba2.hpp"

#include <cmath>
#include <stdexcept>

#include "sfd/nn_ops.hpp"

namespace sfd {

void Mamba2BlockParams::validate() const {
  ssd.validate();
  if (d_inner != ssd.n_heads * ssd.head_dim) {
    throw std::invalid_argument("Mamba2BlockParams: d_inner must equal n_heads*head_dim");
  }
  if (in_proj.rank() != 2 || in_proj.dim(0) != in_proj_width() ||
      in_proj.dim(1) != d_model) {
    throw std::invalid_argument("Mamba2BlockParams: in_proj shape inconsistent with splits");
  }
  if (conv1d.rank() != 3 || conv1d.dim(0) != xbc_width() || conv1d.dim(1) != 1 ||
      conv1d.dim(2) != k_conv) {
    throw std::invalid_argument("Mamba2BlockParams: conv1d kernel shape mismatch");
  }
  if (norm_gamma.rank() != 1 || norm_gamma.dim(0) != d_inner) {
    throw std::invalid_argument("Mamba2BlockParams: norm gamma must be [d_inner]");
  }
  if (out_proj.rank() != 2 || out_proj.dim(0) != d_model || out_proj.dim(1) != d_inner) {
    throw std::invalid_argument("Mamba2BlockParams: out_proj shape mismatch");
  }
}

static Tensor bld_to_bcl(const Tensor& t) {
  const std::size_t B = t.dim(0), L = t.dim(1), D = t.dim(2);
  Tensor out({B, D, L});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t d = 0; d < D; ++d) out.at(b, d, l) = t.at(b, l, d);
  return out;
}

static Tensor bcl_to_bld(const Tensor& t) {
  const std::size_t B = t.dim(0), C = t.dim(1), L = t.dim(2);
  Tensor out({B, L, C});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t l = 0; l < L; ++l) out.at(b, l, c) = t.at(b, c, l);
  return out;
}

Tensor mamba2_block_forward(const Tensor& u, const Mamba2BlockParams& params) {
  params.validate();
  if (u.rank() != 3 || u.dim(2) != params.d_model) {
    throw std::invalid_argument("mamba2_block_forward: u must be [B,L,d_model]");
  }
  const std::size_t B = u.dim(0), L = u.dim(1);
  const std::size_t d_inner = params.d_inner, N = params.ssd.state_dim;
  const std::size_t H = params.ssd.n_heads, P = params.ssd.head_dim;
  const std::size_t xbc = params.xbc_width();

  const Tensor proj = linear_last(u, params.in_proj);  // [B,L,2*d_inner+2N+H]

  Tensor z({B, L, d_inner});
  Tensor xBC({B, L, xbc});
  Tensor dt_raw({B, L, H});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t l = 0; l < L; ++l) {
      const double* row = proj.data() + (b * L + l) * params.in_proj_width();
      for (std::size_t i = 0; i < d_inner; ++i) z.at(b, l, i) = row[i];
      for (std::size_t i = 0; i < xbc; ++i) xBC.at(b, l, i) = row[d_inner + i];
      for (std::size_t i = 0; i < H; ++i) dt_raw.at(b, l, i) = row[d_inner + xbc + i];
    }
  }

  Tensor xBC_conv = silu(bcl_to_bld(conv1d_causal(bld_to_bcl(xBC), params.conv1d)));

  Tensor x({B, L, H, P});
  Tensor B_in({B, L, N});
  Tensor C_in({B, L, N});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t l = 0; l < L; ++l) {
      const double* row = xBC_conv.data() + (b * L + l) * xbc;
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t p = 0; p < P; ++p) x.at(b, l, h, p) = row[h * P + p];
      for (std::size_t n = 0; n < N; ++n) {
        B_in.at(b, l, n) = row[d_inner + n];
        C_in.at(b, l, n) = row[d_inner + N + n];
      }
    }
  }

  Tensor y = ssd_chunked(x, B_in, C_in, dt_raw, params.ssd);

  // Skip path: y += x * D per head.
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t p = 0; p < P; ++p)
          y.at(b, l, h, p) += x.at(b, l, h, p) * params.ssd.D[h];

  Tensor y_flat = y.reshaped({B, L, d_inner});
  Tensor normed = rms_norm_gated(y_flat, z, params.norm_gamma);
  return linear_last(normed, params.out_proj);
}

Tensor ds_mamba2_forward(const Tensor& x, const DSMamba2Params& params) {
  if (x.rank() != 3) throw std::invalid_argument("ds_mamba2_forward: x must be [B,C,L]");
  const Tensor x_in = linear_channels(x, params.lin_in);  // [B,d_model,L]

  const Tensor fwd_out = bld_to_bcl(mamba2_block_forward(bcl_to_bld(x_in), params.fwd));
  const Tensor bwd_out = flip_length(
      bld_to_bcl(mamba2_block_forward(bcl_to_bld(flip_length(x_in)), params.bwd)));

  return linear_channels(fwd_out + bwd_out, params.lin_out);
}

// (B,C,H,W) -> (B*H, C, W): each image row becomes a sequence.
static Tensor rows_as_sequences(const Tensor& t) {
  const std::size_t B = t.dim(0), C = t.dim(1), H = t.dim(2), W = t.dim(3);
  Tensor out({B * H, C, W});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) out.at(b * H + h, c, w) = t.at(b, c, h, w);
  return out;
}

static Tensor sequences_as_rows(const Tensor& t, std::size_t B, std::size_t H) {
  const std::size_t C = t.dim(1), W = t.dim(2);
  Tensor out({B, C, H, W});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) out.at(b, c, h, w) = t.at(b * H + h, c, w);
  return out;
}

// (B,C,H,W) -> (B*W, C, H): each image column becomes a sequence.
static Tensor cols_as_sequences(const Tensor& t) {
  const std::size_t B = t.dim(0), C = t.dim(1), H = t.dim(2), W = t.dim(3);
  Tensor out({B * W, C, H});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) out.at(b * W + w, c, h) = t.at(b, c, h, w);
  return out;
}

static Tensor sequences_as_cols(const Tensor& t, std::size_t B, std::size_t W) {
  const std::size_t C = t.dim(1), H = t.dim(2);
  Tensor out({B, C, H, W});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) out.at(b, c, h, w) = t.at(b * W + w, c, h);
  return out;
}

Tensor aads_mamba2_forward(const Tensor& X, const AADSMamba2Params& params) {
  if (X.rank() != 4) throw std::invalid_argument("aads_mamba2_forward: X must be [B,C,H,W]");
  const std::size_t B = X.dim(0), H = X.dim(2), W = X.dim(3);

  // Path 1: width first, then height.
  Tensor y1 = sequences_as_rows(ds_mamba2_forward(rows_as_sequences(X), params.path1_ds1), B, H);
  y1 = sequences_as_cols(ds_mamba2_forward(cols_as_sequences(y1), params.path1_ds2), B, W);

  // Path 2: height first, then width.
  Tensor y2 = sequences_as_cols(ds_mamba2_forward(cols_as_sequences(X), params.path2_ds1), B, W);
  y2 = sequences_as_rows(ds_mamba2_forward(rows_as_sequences(y2), params.path2_ds2), B, H);

  return conv2d(concat_channels(y1, y2), params.fuse_conv, nullptr, 1, 0);
}

static Tensor init_proj(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(cols));
  return random_uniform({rows, cols}, rng, -s, s);
}

Mamba2BlockParams init_mamba2_block(std::size_t d_model, std::size_t n_heads,
                                    std::size_t head_dim, std::size_t state_dim,
                                    std::size_t chunk_size, std::size_t k_conv,
                                    std::mt19937_64& rng) {
  Mamba2BlockParams p;
  p.d_model = d_model;
  p.d_inner = n_heads * head_dim;
  p.k_conv = k_conv;
  p.ssd.n_heads = n_heads;
  p.ssd.head_dim = head_dim;
  p.ssd.state_dim = state_dim;
  p.ssd.chunk_size = chunk_size;

  p.in_proj = init_proj(p.in_proj_width(), d_model, rng);
  p.conv1d = random_uniform({p.xbc_width(), 1, k_conv}, rng, -0.5, 0.5);
  p.norm_gamma = Tensor::full({p.d_inner}, 1.0);
  p.out_proj = init_proj(d_model, p.d_inner, rng);

  p.ssd.A_log = Tensor({n_heads});
  p.ssd.dt_bias = Tensor({n_heads});
  p.ssd.D = Tensor({n_heads});
  std::uniform_real_distribution<double> a_dist(1.0, 8.0);
  std::uniform_real_distribution<double> dt_dist(0.001, 0.1);
  std::uniform_real_distribution<double> d_dist(-0.5, 0.5);
  for (std::size_t h = 0; h < n_heads; ++h) {
    p.ssd.A_log[h] = std::log(a_dist(rng));
    // softplus(dt_bias) = target  =>  dt_bias = log(expm1(target))
    p.ssd.dt_bias[h] = std::log(std::expm1(dt_dist(rng)));
    p.ssd.D[h] = d_dist(rng);
  }
  return p;
}

DSMamba2Params init_ds_mamba2(std::size_t c_in, std::size_t c_out, std::size_t d_model,
                              std::size_t n_heads, std::size_t head_dim,
                              std::size_t state_dim, std::size_t chunk_size,
                              std::size_t k_conv, std::mt19937_64& rng) {
  DSMamba2Params p;
  p.lin_in = init_proj(d_model, c_in, rng);
  p.lin_out = init_proj(c_out, d_model, rng);
  p.fwd = init_mamba2_block(d_model, n_heads, head_dim, state_dim, chunk_size, k_conv, rng);
  p.bwd = init_mamba2_block(d_model, n_heads, head_dim, state_dim, chunk_size, k_conv, rng);
  return p;
}

}  // namespace sfd
