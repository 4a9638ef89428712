#pragma once

// Shared constants of the polynomial exp(-p). Both kernel backends must
// evaluate exactly this sequence (round-to-nearest k, Cody-Waite argument
// reduction, degree-11 Horner with fma) or the bit-equivalence contract
// between them breaks.

namespace gsrefine::kernels::detail {

inline constexpr double kExpFlushAbove = 708.0;
inline constexpr double kLog2E = 1.4426950408889634074;        // log2(e)
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;   // high bits of ln 2
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;   // ln 2 - kLn2Hi

// 1/i! for i = 11 .. 0 (Horner order).
inline constexpr double kExpPoly[12] = {
    1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0, 1.0 / 40320.0,
    1.0 / 5040.0,     1.0 / 720.0,     1.0 / 120.0,    1.0 / 24.0,
    1.0 / 6.0,        0.5,             1.0,            1.0};

}  // namespace gsrefine::kernels::detail
