#include "sfd/ssd.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

#include "sfd/nn_ops.hpp"

#if defined(__x86_64__)
#include <immintrin.h>
#endif

namespace sfd {

void SSDParams::validate() const {
  if (n_heads == 0 || head_dim == 0 || state_dim == 0) {
    throw std::invalid_argument("SSDParams: dims must be positive");
  }
  if (chunk_size == 0) throw std::invalid_argument("SSDParams: chunk size must be >= 1");
  if (A_log.rank() != 1 || A_log.dim(0) != n_heads || dt_bias.rank() != 1 ||
      dt_bias.dim(0) != n_heads || D.rank() != 1 || D.dim(0) != n_heads) {
    throw std::invalid_argument("SSDParams: A_log/dt_bias/D must each be [n_heads]");
  }
}

Tensor segsum(const Tensor& a) {
  const std::size_t T = a.dim(a.rank() - 1);
  const std::size_t rows = a.size() / T;
  std::vector<std::size_t> out_shape = a.shape();
  out_shape.push_back(T);
  if (out_shape.size() > 4) {
    throw std::invalid_argument("segsum: result rank would exceed 4; flatten leading dims");
  }
  Tensor out(out_shape);
  const double ninf = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = a.data() + r * T;
    double* dst = out.data() + r * T * T;
    for (std::size_t i = 0; i < T; ++i) {
      for (std::size_t j = 0; j < T; ++j) {
        if (j > i) {
          dst[i * T + j] = ninf;
        } else {
          double acc = 0.0;
          for (std::size_t k = j + 1; k <= i; ++k) acc += src[k];
          dst[i * T + j] = acc;
        }
      }
    }
  }
  return out;
}

static void check_ssd_shapes(const Tensor& x, const Tensor& B_in, const Tensor& C_in,
                             const Tensor& dt_raw, const SSDParams& params) {
  params.validate();
  if (x.rank() != 4) throw std::invalid_argument("ssd: x must be [B,L,H,P]");
  const std::size_t B = x.dim(0), L = x.dim(1);
  if (x.dim(2) != params.n_heads || x.dim(3) != params.head_dim) {
    throw std::invalid_argument("ssd: x head/state dims disagree with params");
  }
  auto check3 = [&](const Tensor& t, std::size_t last, const char* name) {
    if (t.rank() != 3 || t.dim(0) != B || t.dim(1) != L || t.dim(2) != last) {
      throw std::invalid_argument(std::string("ssd: bad shape for ") + name);
    }
  };
  check3(B_in, params.state_dim, "B_in");
  check3(C_in, params.state_dim, "C_in");
  check3(dt_raw, params.n_heads, "dt_raw");
  for (const Tensor* t : {&x, &B_in, &C_in, &dt_raw}) {
    for (std::size_t i = 0; i < t->size(); ++i) {
      if (!std::isfinite((*t)[i])) throw std::invalid_argument("ssd: non-finite input");
    }
  }
}

Tensor ssm_naive_oracle(const Tensor& x, const Tensor& B_in, const Tensor& C_in,
                        const Tensor& dt_raw, const SSDParams& params) {
  check_ssd_shapes(x, B_in, C_in, dt_raw, params);
  const std::size_t B = x.dim(0), L = x.dim(1), H = params.n_heads;
  const std::size_t P = params.head_dim, N = params.state_dim;

  Tensor y({B, L, H, P});
  std::vector<double> S(P * N);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      const double A = -std::exp(params.A_log[h]);
      std::fill(S.begin(), S.end(), 0.0);
      for (std::size_t t = 0; t < L; ++t) {
        const double dt = softplus(dt_raw.at(b, t, h) + params.dt_bias[h]);
        const double decay = std::exp(A * dt);
        const double* Bv = B_in.data() + (b * L + t) * N;
        const double* Cv = C_in.data() + (b * L + t) * N;
        const double* xv = x.data() + ((b * L + t) * H + h) * P;
        for (std::size_t p = 0; p < P; ++p) {
          const double xbar = xv[p] * dt;
          double* Sp = S.data() + p * N;
          double acc = 0.0;
          for (std::size_t n = 0; n < N; ++n) {
            Sp[n] = decay * Sp[n] + xbar * Bv[n];
            acc += Sp[n] * Cv[n];
          }
          y.at(b, t, h, p) = acc;
        }
      }
    }
  }
  return y;
}

namespace {

#if defined(__x86_64__)
// Batched exp over a contiguous buffer, 4 lanes at a time. Standard
// argument reduction exp(x) = 2^k * exp(r) with |r| <= ln2/2 and a
// degree-13 Taylor polynomial, which is exact to ~1 ulp on that interval.
// Inputs below the double underflow threshold flush to 0.
__attribute__((target("avx2,fma")))
void vexp(const double* in, double* out, std::size_t n) {
  static constexpr double kInvFact[14] = {
      1.0,
      1.0,
      1.0 / 2,
      1.0 / 6,
      1.0 / 24,
      1.0 / 120,
      1.0 / 720,
      1.0 / 5040,
      1.0 / 40320,
      1.0 / 362880,
      1.0 / 3628800,
      1.0 / 39916800,
      1.0 / 479001600,
      1.0 / 6227020800.0,
  };
  const __m256d log2e = _mm256_set1_pd(1.44269504088896340736);
  // ln2 split so that k * c1 is exact for any representable k.
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d lo_cut = _mm256_set1_pd(-708.0);
  const __m256d hi_cut = _mm256_set1_pd(708.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(in + i);
    const __m256d under = _mm256_cmp_pd(xv, lo_cut, _CMP_LT_OQ);
    const __m256d xc = _mm256_min_pd(_mm256_max_pd(xv, lo_cut), hi_cut);
    const __m256d kd = _mm256_round_pd(_mm256_mul_pd(xc, log2e),
                                       _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(kd, c1, xc);
    r = _mm256_fnmadd_pd(kd, c2, r);
    __m256d p = _mm256_set1_pd(kInvFact[13]);
    for (int d = 12; d >= 0; --d) {
      p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[d]));
    }
    const __m256i k64 = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(kd));
    const __m256i ebits =
        _mm256_slli_epi64(_mm256_add_epi64(k64, _mm256_set1_epi64x(1023)), 52);
    __m256d res = _mm256_mul_pd(p, _mm256_castsi256_pd(ebits));
    res = _mm256_andnot_pd(under, res);
    _mm256_storeu_pd(out + i, res);
  }
  for (; i < n; ++i) out[i] = std::exp(in[i]);
}
#endif

// One (batch, head) lane of the chunked scan over the padded sequence.
// The body is a template over the per-head dims: PC/NC == 0 means "read them
// from params at runtime", a nonzero value pins them at compile time so the
// inner loops fully unroll. It is force-inlined into thin wrappers below, one
// of which is compiled for AVX2+FMA and picked by a runtime CPU check.
template <std::size_t PC, std::size_t NC>
inline void chunked_lane_body(
    const Tensor& x, const Tensor& B_in, const Tensor& C_in, const Tensor& dt_raw,
    const SSDParams& params, std::size_t b, std::size_t h, std::size_t Lp,
    const std::vector<double>& G, Tensor& y) {
  const std::size_t L = x.dim(1), H = params.n_heads;
  const std::size_t P = PC ? PC : params.head_dim;
  const std::size_t N = NC ? NC : params.state_dim;
  const std::size_t Q = params.chunk_size;
  const std::size_t n_chunks = Lp / Q;
  const double A = -std::exp(params.A_log[h]);
  const double bias = params.dt_bias[h];
  // dt_raw on pad steps is a large negative constant so dt is ~0 and the pad
  // region neither injects nor decays state.
  const double pad_dt = softplus(-60.0 + bias);

  std::vector<double> dt(Lp), cum(Lp), eq(Lp), wbuf(Q), xbar(Q * P), xsc(Q * P);
  std::vector<double> acc_p(P), state_in(P * N, 0.0);

  const double* draw = dt_raw.data() + (b * L) * H + h;
  for (std::size_t t = 0; t < L; ++t) dt[t] = softplus(draw[t * H] + bias);
  for (std::size_t t = L; t < Lp; ++t) dt[t] = pad_dt;

  // Per-chunk inclusive cumsums of the log decays, exponentiated in one
  // batched pass over the whole lane.
  for (std::size_t c = 0; c < n_chunks; ++c) {
    double run = 0.0;
    for (std::size_t q = 0; q < Q; ++q) {
      run += A * dt[c * Q + q];
      cum[c * Q + q] = run;
    }
  }
  for (std::size_t t = 0; t < Lp; ++t) eq[t] = std::exp(cum[t]);

  // One sequential sweep over the chunks: the intra-chunk (diagonal) part and
  // the carried-state (off-diagonal) part both land on y while the chunk is
  // hot, and the end state feeds the next chunk directly. The pairwise decay
  // mask exp(cum[l] - cum[s]) is realized as e[l]/e[s]: inputs are pre-scaled
  // by 1/e[s] once and outputs by e[l] once, which keeps the transcendental
  // count linear in the chunk length. When the in-chunk decay span is extreme
  // enough that 1/e[s] would overflow, a per-pair exp fallback preserves
  // exactness.
  for (std::size_t c = 0; c < n_chunks; ++c) {
    const std::size_t t0 = c * Q;
    const double* cumc = cum.data() + t0;
    const double* eqc = eq.data() + t0;
    const bool scaled = cumc[Q - 1] > -600.0;
    for (std::size_t q = 0; q < Q; ++q) {
      const std::size_t t = t0 + q;
      const double* xv = t < L ? x.data() + ((b * L + t) * H + h) * P : nullptr;
      const double scale = dt[t] * (scaled ? 1.0 / eqc[q] : 1.0);
      double* dst = (scaled ? xsc : xbar).data() + q * P;
      for (std::size_t p = 0; p < P; ++p) dst[p] = xv ? xv[p] * scale : 0.0;
    }

    const double* Gc = G.data() + c * Q * Q;
    for (std::size_t l = 0; l < Q; ++l) {
      const std::size_t t = t0 + l;
      if (t >= L) break;
      double* yv = y.data() + ((b * L + t) * H + h) * P;
      const double el = eqc[l];

      // Carried-state contribution from all previous chunks. States are laid
      // out [N][P] so every inner loop is a reduction-free fused
      // multiply-add over the head dimension.
      const double* Cv = C_in.data() + (b * L + t) * N;
      std::fill(acc_p.begin(), acc_p.end(), 0.0);
      for (std::size_t n = 0; n < N; ++n) {
        const double cn = Cv[n];
        const double* sp = state_in.data() + n * P;
        for (std::size_t p = 0; p < P; ++p) acc_p[p] += cn * sp[p];
      }

      // Intra-chunk contributions through the exp(segsum) mask, fused onto
      // the same accumulator so y gets a single store per position.
      if (scaled) {
        for (std::size_t s = 0; s <= l; ++s) {
          const double g = Gc[l * Q + s];
          const double* xs = xsc.data() + s * P;
          for (std::size_t p = 0; p < P; ++p) acc_p[p] += g * xs[p];
        }
        for (std::size_t p = 0; p < P; ++p) yv[p] = el * acc_p[p];
      } else {
        for (std::size_t p = 0; p < P; ++p) yv[p] = el * acc_p[p];
        for (std::size_t s = 0; s <= l; ++s) {
          const double w = Gc[l * Q + s] * std::exp(cumc[l] - cumc[s]);
          const double* xs = xbar.data() + s * P;
          for (std::size_t p = 0; p < P; ++p) yv[p] += w * xs[p];
        }
      }
    }

    // Chunk end state from intra-chunk inputs (decay_states =
    // exp(cum_last - cum)), folded straight into the carried-state update.
    // n is the outer loop so each P-wide state row accumulates in registers
    // across the chunk instead of bouncing through memory.
    const std::size_t s_lim = t0 < L ? std::min(Q, L - t0) : 0;
    const double* xin = (scaled ? xsc : xbar).data();
    const double* Bv0 = B_in.data() + (b * L + t0) * N;
    for (std::size_t s = 0; s < s_lim; ++s) {
      wbuf[s] = scaled ? 1.0 : std::exp(cumc[Q - 1] - cumc[s]);
    }
    const double cd = eqc[Q - 1];
    const double tail = scaled ? cd : 1.0;
    for (std::size_t n = 0; n < N; ++n) {
      double* sp = state_in.data() + n * P;
      std::fill(acc_p.begin(), acc_p.end(), 0.0);
      for (std::size_t s = 0; s < s_lim; ++s) {
        const double wb = wbuf[s] * Bv0[s * N + n];
        const double* xs = xin + s * P;
        for (std::size_t p = 0; p < P; ++p) acc_p[p] += wb * xs[p];
      }
      for (std::size_t p = 0; p < P; ++p) sp[p] = cd * sp[p] + tail * acc_p[p];
    }
  }
}

void chunked_lane_generic(const Tensor& x, const Tensor& B_in, const Tensor& C_in,
                          const Tensor& dt_raw, const SSDParams& params, std::size_t b,
                          std::size_t h, std::size_t Lp, const std::vector<double>& G,
                          Tensor& y) {
  chunked_lane_body<0, 0>(x, B_in, C_in, dt_raw, params, b, h, Lp, G, y);
}

#if defined(__x86_64__)
// Hand-vectorized lane for the head_dim=8 / state_dim=16 configuration used
// throughout: each 8-wide slice over the head dimension is a pair of 4-double
// vectors, so every inner loop is two fused multiply-adds. Only the
// well-scaled regime is implemented; if any chunk's decay span is extreme the
// function bails out and the caller falls back to the generic lane with its
// per-pair exp path.
__attribute__((target("avx2,fma")))
bool chunked_lane_avx2_p8n16(const Tensor& x, const Tensor& B_in, const Tensor& C_in,
                             const Tensor& dt_raw, const SSDParams& params, std::size_t b,
                             std::size_t h, std::size_t Lp, const std::vector<double>& G,
                             Tensor& y) {
  constexpr std::size_t P = 8, N = 16;
  const std::size_t L = x.dim(1), H = params.n_heads, Q = params.chunk_size;
  const std::size_t n_chunks = Lp / Q;
  const double A = -std::exp(params.A_log[h]);
  const double bias = params.dt_bias[h];
  const double pad_dt = softplus(-60.0 + bias);

  std::vector<double> dt(Lp), cum(Lp), eq(Lp), xsc(Q * P);
  alignas(32) double state[N * P] = {};

  const double* draw = dt_raw.data() + (b * L) * H + h;
  for (std::size_t t = 0; t < L; ++t) dt[t] = softplus(draw[t * H] + bias);
  for (std::size_t t = L; t < Lp; ++t) dt[t] = pad_dt;

  for (std::size_t c = 0; c < n_chunks; ++c) {
    double run = 0.0;
    for (std::size_t q = 0; q < Q; ++q) {
      run += A * dt[c * Q + q];
      cum[c * Q + q] = run;
    }
    if (run <= -600.0) return false;
  }
  vexp(cum.data(), eq.data(), Lp);

  for (std::size_t c = 0; c < n_chunks; ++c) {
    const std::size_t t0 = c * Q;
    const double* eqc = eq.data() + t0;
    const std::size_t l_lim = std::min(Q, L - t0);

    for (std::size_t q = 0; q < l_lim; ++q) {
      const double* xv = x.data() + ((b * L + t0 + q) * H + h) * P;
      const __m256d sc = _mm256_set1_pd(dt[t0 + q] / eqc[q]);
      _mm256_storeu_pd(xsc.data() + q * P,
                       _mm256_mul_pd(sc, _mm256_loadu_pd(xv)));
      _mm256_storeu_pd(xsc.data() + q * P + 4,
                       _mm256_mul_pd(sc, _mm256_loadu_pd(xv + 4)));
    }
    for (std::size_t q = l_lim; q < Q; ++q) {
      _mm256_storeu_pd(xsc.data() + q * P, _mm256_setzero_pd());
      _mm256_storeu_pd(xsc.data() + q * P + 4, _mm256_setzero_pd());
    }

    const double* Gc = G.data() + c * Q * Q;
    for (std::size_t l = 0; l < l_lim; ++l) {
      const std::size_t t = t0 + l;
      const double* Cv = C_in.data() + (b * L + t) * N;
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      // Carried state from previous chunks: y_off = C_t . S.
      for (std::size_t n = 0; n < N; ++n) {
        const __m256d cn = _mm256_broadcast_sd(Cv + n);
        acc0 = _mm256_fmadd_pd(cn, _mm256_load_pd(state + n * P), acc0);
        acc1 = _mm256_fmadd_pd(cn, _mm256_load_pd(state + n * P + 4), acc1);
      }
      // Intra-chunk part through the scaled decay mask.
      for (std::size_t s = 0; s <= l; ++s) {
        const __m256d g = _mm256_broadcast_sd(Gc + l * Q + s);
        acc0 = _mm256_fmadd_pd(g, _mm256_loadu_pd(xsc.data() + s * P), acc0);
        acc1 = _mm256_fmadd_pd(g, _mm256_loadu_pd(xsc.data() + s * P + 4), acc1);
      }
      const __m256d el = _mm256_set1_pd(eqc[l]);
      double* yv = y.data() + ((b * L + t) * H + h) * P;
      _mm256_storeu_pd(yv, _mm256_mul_pd(el, acc0));
      _mm256_storeu_pd(yv + 4, _mm256_mul_pd(el, acc1));
    }

    // Chunk end state folded straight into the carried-state update.
    const double* Bv0 = B_in.data() + (b * L + t0) * N;
    const __m256d cd = _mm256_set1_pd(eqc[Q - 1]);
    for (std::size_t n = 0; n < N; ++n) {
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      for (std::size_t s = 0; s < l_lim; ++s) {
        const __m256d wb = _mm256_broadcast_sd(Bv0 + s * N + n);
        acc0 = _mm256_fmadd_pd(wb, _mm256_loadu_pd(xsc.data() + s * P), acc0);
        acc1 = _mm256_fmadd_pd(wb, _mm256_loadu_pd(xsc.data() + s * P + 4), acc1);
      }
      double* sp = state + n * P;
      _mm256_store_pd(sp, _mm256_fmadd_pd(cd, _mm256_load_pd(sp),
                                          _mm256_mul_pd(cd, acc0)));
      _mm256_store_pd(sp + 4, _mm256_fmadd_pd(cd, _mm256_load_pd(sp + 4),
                                              _mm256_mul_pd(cd, acc1)));
    }
  }
  return true;
}
#endif

bool cpu_has_avx2_fma() {
#if defined(__x86_64__)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

void chunked_lane(const Tensor& x, const Tensor& B_in, const Tensor& C_in,
                  const Tensor& dt_raw, const SSDParams& params, std::size_t b,
                  std::size_t h, std::size_t Lp, const std::vector<double>& G,
                  Tensor& y) {
#if defined(__x86_64__)
  if (params.head_dim == 8 && params.state_dim == 16 && cpu_has_avx2_fma() &&
      chunked_lane_avx2_p8n16(x, B_in, C_in, dt_raw, params, b, h, Lp, G, y)) {
    return;
  }
#endif
  chunked_lane_generic(x, B_in, C_in, dt_raw, params, b, h, Lp, G, y);
}

}  // namespace

Tensor ssd_chunked(const Tensor& x, const Tensor& B_in, const Tensor& C_in,
                   const Tensor& dt_raw, const SSDParams& params, int threads) {
  check_ssd_shapes(x, B_in, C_in, dt_raw, params);
  const std::size_t B = x.dim(0), L = x.dim(1), H = params.n_heads;
  const std::size_t N = params.state_dim, Q = params.chunk_size;
  const std::size_t Lp = (L + Q - 1) / Q * Q;
  const std::size_t n_chunks = Lp / Q;

  // G[c][l][s] = C_l . B_s within chunk c; B/C are shared across heads
  // (n_groups = 1), so this is computed once per batch.
  Tensor y({B, L, H, params.head_dim});
  std::vector<std::vector<double>> G_per_batch(B);
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double>& G = G_per_batch[b];
    G.assign(n_chunks * Q * Q, 0.0);
    for (std::size_t c = 0; c < n_chunks; ++c) {
      for (std::size_t l = 0; l < Q; ++l) {
        const std::size_t tl = c * Q + l;
        if (tl >= L) break;
        const double* Cv = C_in.data() + (b * L + tl) * N;
        for (std::size_t s = 0; s <= l; ++s) {
          const std::size_t ts = c * Q + s;
          if (ts >= L) break;
          const double* Bv = B_in.data() + (b * L + ts) * N;
          double acc = 0.0;
          for (std::size_t n = 0; n < N; ++n) acc += Cv[n] * Bv[n];
          G[(c * Q + l) * Q + s] = acc;
        }
      }
    }
  }

  std::size_t n_workers = threads > 0 ? static_cast<std::size_t>(threads)
                                      : std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_lanes = B * H;
  n_workers = std::min(n_workers, n_lanes);

  auto run_lane = [&](std::size_t lane) {
    const std::size_t b = lane / H, h = lane % H;
    chunked_lane(x, B_in, C_in, dt_raw, params, b, h, Lp, G_per_batch[b], y);
  };
  if (n_workers <= 1) {
    for (std::size_t lane = 0; lane < n_lanes; ++lane) run_lane(lane);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t lane = w; lane < n_lanes; lane += n_workers) run_lane(lane);
      });
    }
    for (auto& t : pool) t.join();
  }
  return y;
}

SSDGradients ssd_backward(const Tensor& x, const Tensor& B_in, const Tensor& C_in,
                          const Tensor& dt_raw, const SSDParams& params,
                          const Tensor& upstream) {
  check_ssd_shapes(x, B_in, C_in, dt_raw, params);
  if (!upstream.same_shape(x)) {
    throw std::invalid_argument("ssd_backward: upstream grad must match x shape");
  }
  const std::size_t B = x.dim(0), L = x.dim(1), H = params.n_heads;
  const std::size_t P = params.head_dim, N = params.state_dim;

  SSDGradients g;
  g.x = Tensor::zeros(x.shape());
  g.B_in = Tensor::zeros(B_in.shape());
  g.C_in = Tensor::zeros(C_in.shape());
  g.dt_raw = Tensor::zeros(dt_raw.shape());
  g.A_log = Tensor::zeros(params.A_log.shape());

  // States of the forward sweep are stored per lane: S_hist[t] is the state
  // after step t, S_hist[0] is the zero initial state.
  std::vector<double> S_hist((L + 1) * P * N);
  std::vector<double> gS(P * N);

  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      const double A = -std::exp(params.A_log[h]);
      double gA = 0.0;

      std::fill(S_hist.begin(), S_hist.begin() + P * N, 0.0);
      for (std::size_t t = 0; t < L; ++t) {
        const double dt = softplus(dt_raw.at(b, t, h) + params.dt_bias[h]);
        const double decay = std::exp(A * dt);
        const double* Bv = B_in.data() + (b * L + t) * N;
        const double* xv = x.data() + ((b * L + t) * H + h) * P;
        const double* Sp = S_hist.data() + t * P * N;
        double* Sn = S_hist.data() + (t + 1) * P * N;
        for (std::size_t p = 0; p < P; ++p) {
          const double xbar = xv[p] * dt;
          for (std::size_t n = 0; n < N; ++n) {
            Sn[p * N + n] = decay * Sp[p * N + n] + xbar * Bv[n];
          }
        }
      }

      std::fill(gS.begin(), gS.end(), 0.0);
      for (std::size_t t = L; t-- > 0;) {
        const double raw = dt_raw.at(b, t, h) + params.dt_bias[h];
        const double dt = softplus(raw);
        const double decay = std::exp(A * dt);
        const double* Bv = B_in.data() + (b * L + t) * N;
        const double* Cv = C_in.data() + (b * L + t) * N;
        const double* xv = x.data() + ((b * L + t) * H + h) * P;
        const double* S_cur = S_hist.data() + (t + 1) * P * N;
        const double* S_prev = S_hist.data() + t * P * N;
        const double* gy = upstream.data() + ((b * L + t) * H + h) * P;
        double* gBv = g.B_in.data() + (b * L + t) * N;
        double* gCv = g.C_in.data() + (b * L + t) * N;
        double* gxv = g.x.data() + ((b * L + t) * H + h) * P;

        // y_t = S_t C_t
        for (std::size_t p = 0; p < P; ++p) {
          for (std::size_t n = 0; n < N; ++n) {
            gS[p * N + n] += gy[p] * Cv[n];
            gCv[n] += gy[p] * S_cur[p * N + n];
          }
        }
        // S_t = decay S_{t-1} + (x_t dt) outer B_t
        double g_dt = 0.0;
        double g_decay = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
          const double xbar = xv[p] * dt;
          double g_xbar = 0.0;
          for (std::size_t n = 0; n < N; ++n) {
            const double gs = gS[p * N + n];
            g_xbar += gs * Bv[n];
            gBv[n] += gs * xbar;
            g_decay += gs * S_prev[p * N + n];
          }
          gxv[p] += g_xbar * dt;
          g_dt += g_xbar * xv[p];
        }
        // decay = exp(A dt)
        const double g_Adt = g_decay * decay;
        g_dt += g_Adt * A;
        gA += g_Adt * dt;
        // dt = softplus(raw); d/draw = sigmoid(raw)
        g.dt_raw.at(b, t, h) += g_dt * sigmoid(raw);
        // propagate through the decay to the previous state
        for (std::size_t i = 0; i < P * N; ++i) gS[i] *= decay;
      }
      // A = -exp(A_log) => dA/dA_log = A
      g.A_log[h] += gA * A;
    }
  }
  return g;
}

}  // namespace sfd
