#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "gsrefine/kernels.hpp"
#include "gsrefine/rng.hpp"

using namespace gsrefine;
using kernels::Backend;
using kernels::CompositeRowCtx;

namespace {

struct RowBuffers {
  std::vector<double> t, r, g, b, d;
  explicit RowBuffers(int n, Rng& rng) : t(n), r(n), g(n), b(n), d(n) {
    for (int i = 0; i < n; ++i) {
      t[i] = rng.uniform();  // includes values below typical floors
      r[i] = rng.uniform();
      g[i] = rng.uniform();
      b[i] = rng.uniform();
      d[i] = rng.uniform(0.0, 10.0);
    }
  }
  bool identical(const RowBuffers& o) const {
    auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
      return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
    };
    return same(t, o.t) && same(r, o.r) && same(g, o.g) && same(b, o.b) &&
           same(d, o.d);
  }
};

CompositeRowCtx random_ctx(Rng& rng) {
  CompositeRowCtx ctx;
  ctx.c2 = rng.uniform(1e-4, 0.5);
  ctx.c1 = rng.uniform(-1.0, 1.0);
  ctx.c0 = rng.uniform(0.0, 5.0);
  ctx.dx0 = rng.uniform(-30.0, 5.0);
  ctx.opacity = rng.uniform(0.05, 1.0);
  ctx.alpha_max = 0.99;
  ctx.alpha_cutoff = 1.0 / 255.0;
  ctx.t_floor = 1e-4;
  ctx.cr = rng.uniform();
  ctx.cg = rng.uniform();
  ctx.cb = rng.uniform();
  ctx.depth = rng.uniform(0.1, 10.0);
  return ctx;
}

}  // namespace

TEST_CASE("exp_neg matches std::exp to high precision") {
  Rng rng(1);
  double worst = 0;
  for (int i = 0; i < 200000; ++i) {
    const double p = rng.uniform(0.0, 60.0);
    const double want = std::exp(-p);
    const double got = kernels::exp_neg(p);
    worst = std::max(worst, std::abs(got - want) / want);
  }
  CHECK(worst < 1e-13);
  CHECK(kernels::exp_neg(0.0) == 1.0);
  CHECK(kernels::exp_neg(800.0) == 0.0);
}

TEST_CASE("scalar and avx2 composite rows are bit-identical") {
  if (!kernels::avx2_supported()) {
    return;  // nothing to compare on this host
  }
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(67));
    Rng fill(trial);
    RowBuffers a(n, fill);
    RowBuffers b = a;
    const CompositeRowCtx ctx = random_ctx(rng);
    kernels::table_for(Backend::scalar)
        .composite_row(ctx, n, a.t.data(), a.r.data(), a.g.data(), a.b.data(),
                       a.d.data());
    kernels::table_for(Backend::avx2)
        .composite_row(ctx, n, b.t.data(), b.r.data(), b.g.data(), b.b.data(),
                       b.d.data());
    REQUIRE(a.identical(b));
  }
}

TEST_CASE("scalar and avx2 affine rows are bit-identical") {
  if (!kernels::avx2_supported()) {
    return;
  }
  Rng rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(53));
    double q9[9], b3[3];
    for (double& v : q9) {
      v = rng.uniform(-1.5, 1.5);
    }
    for (double& v : b3) {
      v = rng.uniform(-0.5, 0.5);
    }
    Rng fill(trial + 1000);
    const RowBuffers in(n, fill);
    std::vector<double> ar(n), ag(n), ab(n), br(n), bg(n), bb(n);
    kernels::table_for(Backend::scalar)
        .affine_row(q9, b3, in.r.data(), in.g.data(), in.b.data(), n,
                    ar.data(), ag.data(), ab.data());
    kernels::table_for(Backend::avx2)
        .affine_row(q9, b3, in.r.data(), in.g.data(), in.b.data(), n,
                    br.data(), bg.data(), bb.data());
    REQUIRE(std::memcmp(ar.data(), br.data(), n * sizeof(double)) == 0);
    REQUIRE(std::memcmp(ag.data(), bg.data(), n * sizeof(double)) == 0);
    REQUIRE(std::memcmp(ab.data(), bb.data(), n * sizeof(double)) == 0);
  }
}

TEST_CASE("scalar and avx2 luminance rows are bit-identical") {
  if (!kernels::avx2_supported()) {
    return;
  }
  for (int trial = 0; trial < 100; ++trial) {
    Rng fill(trial + 5000);
    const int n = 1 + static_cast<int>(fill.uniform_index(97));
    const RowBuffers in(n, fill);
    std::vector<double> ya(n), yb(n);
    kernels::table_for(Backend::scalar)
        .luminance_row(in.r.data(), in.g.data(), in.b.data(), n, ya.data());
    kernels::table_for(Backend::avx2)
        .luminance_row(in.r.data(), in.g.data(), in.b.data(), n, yb.data());
    REQUIRE(std::memcmp(ya.data(), yb.data(), n * sizeof(double)) == 0);
  }
}

TEST_CASE("composite row respects floors, cutoffs, and the alpha clamp") {
  CompositeRowCtx ctx{};
  ctx.c2 = 0.0;
  ctx.c1 = 0.0;
  ctx.c0 = 0.0;  // alpha = opacity everywhere
  ctx.dx0 = 0.0;
  ctx.opacity = 1.0;
  ctx.alpha_max = 0.99;
  ctx.alpha_cutoff = 1.0 / 255.0;
  ctx.t_floor = 1e-4;
  ctx.cr = 1.0;
  ctx.cg = 0.5;
  ctx.cb = 0.25;
  ctx.depth = 4.0;
  std::vector<double> t = {1.0, 1e-5, 1.0};
  std::vector<double> r(3, 0), g(3, 0), b(3, 0), d(3, 0);
  kernels::active().composite_row(ctx, 3, t.data(), r.data(), g.data(),
                                  b.data(), d.data());
  CHECK(t[0] == doctest::Approx(0.01));   // alpha clamped at 0.99
  CHECK(t[1] == 1e-5);                    // below floor: untouched
  CHECK(d[0] == doctest::Approx(0.99 * 4.0));
  CHECK(d[1] == 0.0);
  CHECK(r[0] == doctest::Approx(0.99));

  // An opacity below the cutoff contributes nothing.
  ctx.opacity = 1e-4;
  std::vector<double> t2 = {1.0};
  std::vector<double> z(1, 0);
  std::vector<double> z2(1, 0), z3(1, 0), z4(1, 0);
  kernels::active().composite_row(ctx, 1, t2.data(), z.data(), z2.data(),
                                  z3.data(), z4.data());
  CHECK(t2[0] == 1.0);
  CHECK(z[0] == 0.0);
}

TEST_CASE("backend selection can be forced and restored") {
  const Backend before = kernels::active_backend();
  kernels::force_backend(Backend::scalar);
  CHECK(kernels::active_backend() == Backend::scalar);
  if (kernels::avx2_supported()) {
    kernels::force_backend(Backend::avx2);
    CHECK(kernels::active_backend() == Backend::avx2);
  }
  kernels::force_backend(before);
  CHECK(kernels::backend_name(Backend::scalar) == "scalar");
  CHECK(kernels::backend_name(Backend::avx2) == "avx2");
}
