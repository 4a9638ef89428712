#pragma once

#include <string>

namespace gsrefine::kernels {

/// Arithmetic inner loops (splat compositing, color transform, luminance)
/// exist as a scalar reference and an AVX2 variant. The two are written
/// op-for-op identical (same fma/min/max sequence, shared polynomial exp),
/// so they produce bit-identical output; the equivalence suite asserts
/// exactly that. The backend is picked once at startup from CPUID and can
/// be overridden with force_backend() or GSREFINE_KERNELS=scalar|avx2.
enum class Backend { scalar, avx2 };

/// One splat, one pixel row. The opacity power along the row is the
/// quadratic p(dx) = c2*dx^2 + c1*dx + c0 with dx = dx0 + i, i = 0..n-1.
/// Per live pixel (T >= t_floor): alpha = min(alpha_max, opacity*exp(-p)),
/// skipped when alpha < alpha_cutoff; otherwise color/depth accumulate
/// alpha*T and T multiplies by (1 - alpha).
struct CompositeRowCtx {
  double c2, c1, c0;
  double dx0;
  double opacity;
  double alpha_max, alpha_cutoff, t_floor;
  double cr, cg, cb;
  double depth;
};

using CompositeRowFn = void (*)(const CompositeRowCtx& ctx, int n, double* t,
                                double* acc_r, double* acc_g, double* acc_b,
                                double* acc_d);

/// out = clamp(Q * in + b, 0, 1), Q row-major 3x3.
using AffineRowFn = void (*)(const double* q9, const double* b3,
                             const double* in_r, const double* in_g,
                             const double* in_b, int n, double* out_r,
                             double* out_g, double* out_b);

/// y = 0.299 R + 0.587 G + 0.114 B.
using LuminanceRowFn = void (*)(const double* in_r, const double* in_g,
                                const double* in_b, int n, double* out_y);

struct KernelTable {
  CompositeRowFn composite_row;
  AffineRowFn affine_row;
  LuminanceRowFn luminance_row;
};

bool avx2_supported();
Backend active_backend();
/// Throws std::runtime_error if the backend is not available on this CPU.
void force_backend(Backend b);
const KernelTable& active();
/// Direct access for equivalence tests.
const KernelTable& table_for(Backend b);

std::string backend_name(Backend b);

/// exp(-p) for p >= 0 (flushes to 0 beyond p = 708), scalar form of the
/// polynomial both backends use.
double exp_neg(double p);

}  // namespace gsrefine::kernels
