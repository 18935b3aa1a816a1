#pragma once

#include "sfd/tensor.hpp"

namespace sfd {

/// Per-head state-space parameters. The decay rate is A = -exp(A_log), kept in
/// log space so it stays negative.
struct SSDParams {
  Tensor A_log;   // [H]
  Tensor dt_bias; // [H]
  Tensor D;       // [H] skip weights (applied by the block, not the scan)
  std::size_t n_heads = 0;
  std::size_t head_dim = 0;   // P
  std::size_t state_dim = 0;  // N
  std::size_t chunk_size = 16;

  void validate() const;
};

// out[..., i, j] = sum_{k=j+1..i} a[..., k] for i >= j (zero on the diagonal),
// -inf above the diagonal so that exp() gives 0. a is [..., T].
Tensor segsum(const Tensor& a);

// Ground-truth sequential recurrence, one step at a time:
//   dt_t = softplus(dt_raw_t + dt_bias_h), A_h = -exp(A_log_h)
//   S_t = exp(A_h dt_t) S_{t-1} + (x_t dt_t) outer B_t,  y_t = S_t C_t
// x [B,L,H,P], B_in/C_in [B,L,N] (shared across heads), dt_raw [B,L,H].
Tensor ssm_naive_oracle(const Tensor& x, const Tensor& B_in, const Tensor& C_in,
                        const Tensor& dt_raw, const SSDParams& params);

// Chunked state-space-duality evaluation of the same recurrence: intra-chunk
// masked products plus cross-chunk state propagation. L is zero-padded to a
// multiple of the chunk size and the output truncated. threads = 0 picks
// hardware concurrency; results are identical for any thread count.
Tensor ssd_chunked(const Tensor& x, const Tensor& B_in, const Tensor& C_in,
                   const Tensor& dt_raw, const SSDParams& params, int threads = 0);

struct SSDGradients {
  Tensor x;       // [B,L,H,P]
  Tensor B_in;    // [B,L,N]
  Tensor C_in;    // [B,L,N]
  Tensor dt_raw;  // [B,L,H]
  Tensor A_log;   // [H]
};

// Reverse-mode adjoint of the sequential recurrence (exact for the forward
// semantics shared by oracle and chunked paths).
SSDGradients ssd_backward(const Tensor& x, const Tensor& B_in, const Tensor& C_in,
                          const Tensor& dt_raw, const SSDParams& params,
                          const Tensor& upstream);

}  // namespace sfd
