// AVX2/FMA variants of the row kernels. Each vector lane performs exactly
// the scalar reference's operation sequence, so outputs are bit-identical
// to the scalar backend (asserted by the kernel equivalence tests).

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

#include "gsrefine/kernels.hpp"
#include "kernels_detail.hpp"

namespace gsrefine::kernels {

namespace {

using detail::kExpFlushAbove;
using detail::kExpPoly;
using detail::kLn2Hi;
using detail::kLn2Lo;
using detail::kLog2E;

inline __m256d exp_neg_pd(__m256d p) {
  const __m256d flush = _mm256_cmp_pd(p, _mm256_set1_pd(kExpFlushAbove),
                                      _CMP_GT_OQ);
  const __m256d y = _mm256_xor_pd(p, _mm256_set1_pd(-0.0));
  const __m256d k = _mm256_round_pd(
      _mm256_mul_pd(y, _mm256_set1_pd(kLog2E)),
      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fmadd_pd(k, _mm256_set1_pd(-kLn2Hi), y);
  r = _mm256_fmadd_pd(k, _mm256_set1_pd(-kLn2Lo), r);
  __m256d acc = _mm256_set1_pd(kExpPoly[0]);
  for (int i = 1; i < 12; ++i) {
    acc = _mm256_fmadd_pd(acc, r, _mm256_set1_pd(kExpPoly[i]));
  }
  // 2^k via exponent bits; k is integral in [-1021, 0] for unflushed lanes.
  const __m128i k32 = _mm256_cvtpd_epi32(k);
  const __m256i k64 = _mm256_cvtepi32_epi64(k32);
  const __m256i bits =
      _mm256_slli_epi64(_mm256_add_epi64(k64, _mm256_set1_epi64x(1023)), 52);
  const __m256d scale = _mm256_castsi256_pd(bits);
  return _mm256_andnot_pd(flush, _mm256_mul_pd(acc, scale));
}

// Scalar tail, the reference sequence (vector path handles n/4 lanes).
inline void composite_px(const CompositeRowCtx& ctx, int i, double* t,
                         double* acc_r, double* acc_g, double* acc_b,
                         double* acc_d) {
  const double ti = t[i];
  if (!(ti >= ctx.t_floor)) {
    return;
  }
  const double dx = ctx.dx0 + static_cast<double>(i);
  double p = std::fma(dx, std::fma(dx, ctx.c2, ctx.c1), ctx.c0);
  p = std::max(p, 0.0);
  double alpha = ctx.opacity * exp_neg(p);
  alpha = std::min(alpha, ctx.alpha_max);
  if (!(alpha >= ctx.alpha_cutoff)) {
    return;
  }
  const double w = alpha * ti;
  acc_r[i] = std::fma(ctx.cr, w, acc_r[i]);
  acc_g[i] = std::fma(ctx.cg, w, acc_g[i]);
  acc_b[i] = std::fma(ctx.cb, w, acc_b[i]);
  acc_d[i] = std::fma(ctx.depth, w, acc_d[i]);
  t[i] = ti * (1.0 - alpha);
}

void composite_row_avx2(const CompositeRowCtx& ctx, int n, double* t,
                        double* acc_r, double* acc_g, double* acc_b,
                        double* acc_d) {
  const __m256d v_floor = _mm256_set1_pd(ctx.t_floor);
  const __m256d v_c2 = _mm256_set1_pd(ctx.c2);
  const __m256d v_c1 = _mm256_set1_pd(ctx.c1);
  const __m256d v_c0 = _mm256_set1_pd(ctx.c0);
  const __m256d v_zero = _mm256_setzero_pd();
  const __m256d v_op = _mm256_set1_pd(ctx.opacity);
  const __m256d v_amax = _mm256_set1_pd(ctx.alpha_max);
  const __m256d v_acut = _mm256_set1_pd(ctx.alpha_cutoff);
  const __m256d v_one = _mm256_set1_pd(1.0);
  const __m256d v_cr = _mm256_set1_pd(ctx.cr);
  const __m256d v_cg = _mm256_set1_pd(ctx.cg);
  const __m256d v_cb = _mm256_set1_pd(ctx.cb);
  const __m256d v_cd = _mm256_set1_pd(ctx.depth);
  const __m256d lane_off = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);

  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vt = _mm256_loadu_pd(t + i);
    const __m256d live = _mm256_cmp_pd(vt, v_floor, _CMP_GE_OQ);
    if (_mm256_movemask_pd(live) == 0) {
      continue;
    }
    const __m256d di =
        _mm256_add_pd(_mm256_set1_pd(static_cast<double>(i)), lane_off);
    const __m256d dx = _mm256_add_pd(_mm256_set1_pd(ctx.dx0), di);
    __m256d p = _mm256_fmadd_pd(dx, _mm256_fmadd_pd(dx, v_c2, v_c1), v_c0);
    p = _mm256_max_pd(p, v_zero);
    __m256d alpha = _mm256_mul_pd(v_op, exp_neg_pd(p));
    alpha = _mm256_min_pd(alpha, v_amax);
    const __m256d pass = _mm256_cmp_pd(alpha, v_acut, _CMP_GE_OQ);
    const __m256d m = _mm256_and_pd(live, pass);
    if (_mm256_movemask_pd(m) == 0) {
      continue;
    }
    const __m256d w = _mm256_mul_pd(alpha, vt);
    const __m256d nr = _mm256_fmadd_pd(v_cr, w, _mm256_loadu_pd(acc_r + i));
    const __m256d ng = _mm256_fmadd_pd(v_cg, w, _mm256_loadu_pd(acc_g + i));
    const __m256d nb = _mm256_fmadd_pd(v_cb, w, _mm256_loadu_pd(acc_b + i));
    const __m256d nd = _mm256_fmadd_pd(v_cd, w, _mm256_loadu_pd(acc_d + i));
    const __m256d nt = _mm256_mul_pd(vt, _mm256_sub_pd(v_one, alpha));
    _mm256_storeu_pd(acc_r + i,
                     _mm256_blendv_pd(_mm256_loadu_pd(acc_r + i), nr, m));
    _mm256_storeu_pd(acc_g + i,
                     _mm256_blendv_pd(_mm256_loadu_pd(acc_g + i), ng, m));
    _mm256_storeu_pd(acc_b + i,
                     _mm256_blendv_pd(_mm256_loadu_pd(acc_b + i), nb, m));
    _mm256_storeu_pd(acc_d + i,
                     _mm256_blendv_pd(_mm256_loadu_pd(acc_d + i), nd, m));
    _mm256_storeu_pd(t + i, _mm256_blendv_pd(vt, nt, m));
  }
  for (; i < n; ++i) {
    composite_px(ctx, i, t, acc_r, acc_g, acc_b, acc_d);
  }
}

inline __m256d clamp01(__m256d v) {
  v = _mm256_min_pd(v, _mm256_set1_pd(1.0));
  return _mm256_max_pd(v, _mm256_setzero_pd());
}

void affine_row_avx2(const double* q9, const double* b3, const double* in_r,
                     const double* in_g, const double* in_b, int n,
                     double* out_r, double* out_g, double* out_b) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_loadu_pd(in_r + i);
    const __m256d g = _mm256_loadu_pd(in_g + i);
    const __m256d b = _mm256_loadu_pd(in_b + i);
    double* outs[3] = {out_r, out_g, out_b};
    for (int c = 0; c < 3; ++c) {
      __m256d acc =
          _mm256_fmadd_pd(_mm256_set1_pd(q9[3 * c + 2]), b,
                          _mm256_set1_pd(b3[c]));
      acc = _mm256_fmadd_pd(_mm256_set1_pd(q9[3 * c + 1]), g, acc);
      acc = _mm256_fmadd_pd(_mm256_set1_pd(q9[3 * c + 0]), r, acc);
      _mm256_storeu_pd(outs[c] + i, clamp01(acc));
    }
  }
  for (; i < n; ++i) {
    const double r = in_r[i], g = in_g[i], b = in_b[i];
    for (int c = 0; c < 3; ++c) {
      double acc = std::fma(q9[3 * c + 2], b, b3[c]);
      acc = std::fma(q9[3 * c + 1], g, acc);
      acc = std::fma(q9[3 * c + 0], r, acc);
      acc = std::min(acc, 1.0);
      acc = std::max(acc, 0.0);
      (c == 0 ? out_r : c == 1 ? out_g : out_b)[i] = acc;
    }
  }
}

void luminance_row_avx2(const double* in_r, const double* in_g,
                        const double* in_b, int n, double* out_y) {
  const __m256d wr = _mm256_set1_pd(0.299);
  const __m256d wg = _mm256_set1_pd(0.587);
  const __m256d wb = _mm256_set1_pd(0.114);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_mul_pd(wb, _mm256_loadu_pd(in_b + i));
    acc = _mm256_fmadd_pd(wg, _mm256_loadu_pd(in_g + i), acc);
    acc = _mm256_fmadd_pd(wr, _mm256_loadu_pd(in_r + i), acc);
    _mm256_storeu_pd(out_y + i, acc);
  }
  for (; i < n; ++i) {
    double acc = 0.114 * in_b[i];
    acc = std::fma(0.587, in_g[i], acc);
    out_y[i] = std::fma(0.299, in_r[i], acc);
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{composite_row_avx2, affine_row_avx2,
                                 luminance_row_avx2};
  return table;
}

}  // namespace gsrefine::kernels

#endif  // __AVX2__ && __FMA__
