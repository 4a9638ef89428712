#include <cstdlib>
#include <stdexcept>
#include <string>

#include "gsrefine/kernels.hpp"

namespace gsrefine::kernels {

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
// TODO: add a NEON table for aarch64; dispatch falls back to scalar there.

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

Backend pick_initial() {
  if (const char* env = std::getenv("GSREFINE_KERNELS")) {
    const std::string s(env);
    if (s == "scalar") {
      return Backend::scalar;
    }
    if (s == "avx2" && avx2_supported()) {
      return Backend::avx2;
    }
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

Backend& current() {
  static Backend b = pick_initial();
  return b;
}

}  // namespace

Backend active_backend() { return current(); }

void force_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_supported()) {
    throw std::runtime_error("AVX2 kernels not supported on this CPU");
  }
  current() = b;
}

const KernelTable& table_for(Backend b) {
#if defined(__x86_64__) || defined(_M_X64)
  if (b == Backend::avx2) {
    if (!avx2_supported()) {
      throw std::runtime_error("AVX2 kernels not supported on this CPU");
    }
    return avx2_table();
  }
#else
  if (b == Backend::avx2) {
    throw std::runtime_error("AVX2 kernels not built on this architecture");
  }
#endif
  return scalar_table();
}

const KernelTable& active() { return table_for(current()); }

std::string backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

}  // namespace gsrefine::kernels
