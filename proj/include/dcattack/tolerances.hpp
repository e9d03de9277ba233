#pragma once

namespace dcattack {

// Single place for every numerical threshold used by the library.
struct Tolerances {
  double feasibility = 1e-8;   // residual of Ap + B delta + c compared to zero
  double certificate = 1e-9;   // Farkas and KKT certificate residuals
  double projection = 1e-12;   // zero test on projection directions
  double fallback = 1e-5;      // relaxed LP tolerance after a stalled subproblem
};

}  // namespace dcattack
