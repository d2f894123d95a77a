#pragma once

#include <vector>

namespace brw {

// Threshold drift: 1.5 * (3 pi^2 sigma_sq)^{1/3}, evaluated in extended
// precision before rounding to double.
double a_critical(double sigma_sq);

// Positive roots of b^3 - a b^2 + 3 pi^2 sigma_sq / 2 = 0.  The two-root
// regime brackets 2 a_c / 3 strictly; the near-degenerate band around a_c
// collapses to the analytic double root so callers can branch on kind.
struct BRoots {
  enum class Kind { None, DoubleRoot, Pair };
  Kind kind = Kind::None;
  double b_small = 0.0;
  double b_a = 0.0;  // the root above 2 a_c / 3; equals b_small for DoubleRoot
};

BRoots b_roots(double sigma_sq, double a);

// Fixed-point iterates b_{n+1} = a - 3 pi^2 sigma_sq / (2 b_n^2).  A
// nonpositive iterate is stored and the sequence cut there, flagged rather
// than raised: divergence to -inf is the expected subcritical behaviour.
struct BIteration {
  std::vector<double> iterates;
  bool stopped_early = false;
};

BIteration b_iteration(double sigma_sq, double a, double b0, int n);

// Closed-form survival certificate for growth factor E (integer >= 2,
// lambda = log E): the maximum over alpha in [0,1] of
//   (b + 3pi^2 sigma^2/(2b^2) - a) * f(alpha) + E^{-1/3} * (a - 3pi^2 sigma^2/(2b^2)) * f(0)
// with f(t) = (t + 1/(E-1))^{1/3}.  A negative maximum certifies the
// two-barrier population growth at this (a, b, E).
struct Certificate {
  double g_max = 0.0;
  bool negative = false;
};

Certificate survival_certificate(double sigma_sq, double a, double b, int growth_factor);

}  // namespace brw
