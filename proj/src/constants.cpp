#include "brw/constants.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "brw/errors.hpp"

namespace brw {

namespace {

// 3 pi^2 sigma_sq / 2, the constant term of the root cubic.
double cubic_k(double sigma_sq) {
  return 1.5 * std::numbers::pi * std::numbers::pi * sigma_sq;
}

double cubic(double b, double a, double k) { return b * b * b - a * b * b + k; }

// Safeguarded Newton on the cubic inside a sign-changing bracket
// [lo, hi] with p(lo) and p(hi) of opposite sign.
double cubic_root_in(double lo, double hi, double a, double k) {
  double flo = cubic(lo, a, k);
  double b = 0.5 * (lo + hi);
  for (int i = 0; i < 120; ++i) {
    const double f = cubic(b, a, k);
    if ((f < 0.0) == (flo < 0.0)) lo = b; else hi = b;
    const double df = b * (3.0 * b - 2.0 * a);
    double next = df != 0.0 ? b - f / df : b;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - b) <= 1e-16 * std::max(1.0, std::abs(b))) return next;
    b = next;
  }
  return b;
}

}  // namespace

double a_critical(double sigma_sq) {
  if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq))
    throw DomainError("sigma_sq must be positive");
  const long double pi = std::numbers::pi_v<long double>;
  const long double v = 1.5L * std::cbrt(static_cast<long double>(3.0L * pi * pi * sigma_sq));
  return static_cast<double>(v);
}

BRoots b_roots(double sigma_sq, double a) {
  if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("a must be positive");
  const double ac = a_critical(sigma_sq);
  const double b_double = 2.0 * ac / 3.0;
  BRoots r;
  if (std::abs(a - ac) <= 1e-9) {
    r.kind = BRoots::Kind::DoubleRoot;
    r.b_small = r.b_a = b_double;
    return r;
  }
  if (a < ac) {
    r.kind = BRoots::Kind::None;
    return r;
  }
  const double k = cubic_k(sigma_sq);
  // p(0) = k > 0, p(2ac/3) < 0 for a > ac, p(a) = k > 0: two clean brackets.
  r.kind = BRoots::Kind::Pair;
  r.b_small = cubic_root_in(1e-300, b_double, a, k);
  r.b_a = cubic_root_in(b_double, a, a, k);
  return r;
}

BIteration b_iteration(double sigma_sq, double a, double b0, int n) {
  if (!(b0 > 0.0)) throw DomainError("b0 must be positive");
  if (n < 1) throw DomainError("need at least one iterate");
  const double k = cubic_k(sigma_sq);
  BIteration seq;
  seq.iterates.reserve(static_cast<size_t>(n));
  double b = b0;
  for (int i = 0; i < n; ++i) {
    b = a - k / (b * b);
    seq.iterates.push_back(b);
    if (b <= 0.0) {
      seq.stopped_early = true;
      break;
    }
  }
  return seq;
}

Certificate survival_certificate(double sigma_sq, double a, double b, int growth_factor) {
  if (!(b > 0.0)) throw DomainError("certificate needs b > 0");
  if (growth_factor < 2) throw DomainError("growth factor must be an integer >= 2");
  const double drift_gap = b + cubic_k(sigma_sq) / (b * b) - a;
  const double f0 = std::cbrt(1.0 / (growth_factor - 1.0));
  const double f1 = std::cbrt(1.0 + 1.0 / (growth_factor - 1.0));
  const double tail = std::cbrt(1.0 / growth_factor) * (a - cubic_k(sigma_sq) / (b * b)) * f0;
  // f is increasing, so the maximizing alpha sits at an interval end.
  Certificate c;
  c.g_max = drift_gap * (drift_gap >= 0.0 ? f1 : f0) + tail;
  c.negative = c.g_max < 0.0;
  return c;
}

}  // namespace brw
