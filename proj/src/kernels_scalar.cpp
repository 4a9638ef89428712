#include <bit>
#include <cmath>
#include <cstdint>

#include "gsrefine/kernels.hpp"
#include "kernels_detail.hpp"

namespace gsrefine::kernels {

double exp_neg(double p) {
  using namespace detail;
  if (p > kExpFlushAbove) {
    return 0.0;
  }
  const double y = -p;
  const double k = std::nearbyint(y * kLog2E);
  double r = std::fma(k, -kLn2Hi, y);
  r = std::fma(k, -kLn2Lo, r);
  double acc = kExpPoly[0];
  for (int i = 1; i < 12; ++i) {
    acc = std::fma(acc, r, kExpPoly[i]);
  }
  const auto bits = static_cast<std::uint64_t>(
      static_cast<std::int64_t>(k) + 1023) << 52;
  return acc * std::bit_cast<double>(bits);
}

namespace {

void composite_row_scalar(const CompositeRowCtx& ctx, int n, double* t,
                          double* acc_r, double* acc_g, double* acc_b,
                          double* acc_d) {
  for (int i = 0; i < n; ++i) {
    const double ti = t[i];
    if (!(ti >= ctx.t_floor)) {
      continue;
    }
    const double dx = ctx.dx0 + static_cast<double>(i);
    double p = std::fma(dx, std::fma(dx, ctx.c2, ctx.c1), ctx.c0);
    p = std::max(p, 0.0);
    double alpha = ctx.opacity * exp_neg(p);
    alpha = std::min(alpha, ctx.alpha_max);
    if (!(alpha >= ctx.alpha_cutoff)) {
      continue;
    }
    const double w = alpha * ti;
    acc_r[i] = std::fma(ctx.cr, w, acc_r[i]);
    acc_g[i] = std::fma(ctx.cg, w, acc_g[i]);
    acc_b[i] = std::fma(ctx.cb, w, acc_b[i]);
    acc_d[i] = std::fma(ctx.depth, w, acc_d[i]);
    t[i] = ti * (1.0 - alpha);
  }
}

void affine_row_scalar(const double* q9, const double* b3, const double* in_r,
                       const double* in_g, const double* in_b, int n,
                       double* out_r, double* out_g, double* out_b) {
  for (int i = 0; i < n; ++i) {
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

void luminance_row_scalar(const double* in_r, const double* in_g,
                          const double* in_b, int n, double* out_y) {
  for (int i = 0; i < n; ++i) {
    double acc = 0.114 * in_b[i];
    acc = std::fma(0.587, in_g[i], acc);
    out_y[i] = std::fma(0.299, in_r[i], acc);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{composite_row_scalar, affine_row_scalar,
                                 luminance_row_scalar};
  return table;
}

}  // namespace gsrefine::kernels
