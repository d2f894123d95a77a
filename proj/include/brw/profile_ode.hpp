#pragma once

#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace brw {

struct BlowsDown {
  double t_max = 0.0;
};

struct GrowsLikeCubeRoot {
  double b_limit = 0.0;
};

// Horizon reached before either behaviour could be certified.  The stored
// grid is still valid data; only the long-run verdict is missing.
struct Undetermined {};

using ProfileClass = std::variant<BlowsDown, GrowsLikeCubeRoot, Undetermined>;

// Quartic dense-output piece of one accepted step, valid on
// [u0, u0 + du].  Evaluation uses the Horner form of the standard
// fifth-order-pair interpolant, fourth-order accurate everywhere on the
// step, so mid-step queries are as good as the nodes themselves.
struct DenseSegment {
  double u0 = 0.0, du = 0.0;
  double r1 = 0.0, r2 = 0.0, r3 = 0.0, r4 = 0.0, r5 = 0.0;

  double eval(double u) const {
    const double th = (u - u0) / du;
    return r1 + th * (r2 + (1.0 - th) * (r3 + th * (r4 + (1.0 - th) * r5)));
  }
};

// Solution of f'(t) = a/3 t^{-2/3} - pi^2 sigma^2 / (2 f^2), integrated in
// u = t^{1/3} where it reads dh/du = a - (3 pi^2 sigma^2 / 2) u^2 / h^2 with
// h(u) = f(u^3); the substitution removes the t = 0 singularity exactly.
struct ProfileSolution {
  double sigma_sq = 0.0;
  double a = 0.0;
  double s = 0.0;  // initial value h(0)
  std::vector<double> grid;    // u nodes, strictly increasing, grid[0] = 0
  std::vector<double> values;  // h at the nodes, strictly positive
  std::vector<DenseSegment> segments;  // one per grid interval
  ProfileClass classification = Undetermined{};
  double residual_max = 0.0;   // worst deviation of the first integral, see below

  bool blows_down() const { return std::holds_alternative<BlowsDown>(classification); }
  bool grows() const { return std::holds_alternative<GrowsLikeCubeRoot>(classification); }
  double t_max() const { return std::get<BlowsDown>(classification).t_max; }
  double b_limit() const { return std::get<GrowsLikeCubeRoot>(classification).b_limit; }
};

// Adaptive embedded pair with error-per-unit-step control, so accumulated
// defects along the whole span stay of order tol relative to the solution
// scale 1 + max|h|.  residual_max reports the first integral
// h(u) - a u + (3 pi^2 sigma^2 / 2) * int_0^u v^2/h(v)^2 dv - s recomputed
// with an independent per-step Simpson quadrature on the dense output (any
// Runge-Kutta step conserves the integral identity exactly when the
// quadrature is carried as an extra state component, which would make the
// diagnostic vacuous).  State and quadrature accumulate in extended
// precision so the reported defect measures the method, not the summation.
//
// Blow-down handling: near the collapse h ~ K (u* - u)^{1/3}, the controller
// switches to a relative per-step budget (absolute accuracy at a cube-root
// singularity forces vanishing progress).  Once the sink term dominates the
// drift (k2 u^2 >= 10 a h^2) and the remaining distance estimate
// h^3 / (3 k2 u^2) drops below 1e-6 * u, the eps_stop = 1e-8 * s crossing is
// located by bisection on the drift-corrected local law
// h^3 - S d + (9a / 5S)(h^5 - (h^3 - S d)^{5/3}), S = 3 k2 (u + d/2)^2,
// whose neglected terms are O(d^2/u^2) relative; marching the stepper into
// that stretch instead would hit coordinate quantization (du comparable to
// ulp(u)) and pollute the residual diagnostic.  The first integral is
// closed over the terminal stretch with the exact differential identity
// k2 dq = a du - dh.  Stopping at eps_stop rather than 0 perturbs t_max by
// O(eps_stop^3), far below every supported tolerance.
ProfileSolution solve_profile(double sigma_sq, double a, double s,
                              double t_horizon, double tol);

// Extends the horizon geometrically until the solution either blows down or
// the cube-root slope stabilizes (relative spread of f/t^{1/3} below 0.5%
// over the last two time decades and value above 2 a_c / 3), giving a
// classified solution.  NumericalFailure (Unclassified) at the safety
// horizon u = 1e6.
ProfileSolution solve_until_classified(double sigma_sq, double a, double s, double tol);

// Exact scaling transform u -> lambda^{-1/3} u, h -> lambda^{-1/3} h; the
// drift a and sigma_sq are untouched, BlowsDown(t_max) maps to t_max/lambda,
// the cube-root slope is scale-free.
ProfileSolution rescale(const ProfileSolution& sol, double lambda);

// Solution value at an arbitrary u inside the grid span, evaluated on the
// stored dense segment covering u.
double profile_value(const ProfileSolution& sol, double u);

// Blow-down time to relative accuracy tol, or absent when the solution is
// classified as growing.  Throws Unclassified at the safety horizon.
std::optional<double> blow_down_time(double sigma_sq, double a, double s, double tol);

// c = t_max(s = 1)^{-1/3}: the unique s whose blow-down time is 1, by the
// scaling law t_max(s) = s^3 t_max(1).  Requires a at least 1e-6 below the
// critical drift, where t_max is finite.
double extinction_rate(double sigma_sq, double a, double tol = 1e-9);

// Limit of f/t^{1/3} from the tail of the grid: three decade-spaced samples
// combined by Aitken extrapolation, which is exact on a geometric approach.
// DomainError unless the solution is classified GrowsLikeCubeRoot.
double asymptotic_slope(const ProfileSolution& sol);

// Cross-check mode: fixed-point sweeps of the integral form
// h(u) = s + a u - k2 int_0^u v^2/h(v)^2 dv on a uniform grid over
// [0, t_small^{1/3}], with cumulative trapezoid prefix integrals.  The
// iteration contracts only for small spans; it exists to check the adaptive
// stepper against an independent construction, not for production use.
// Returns (u, h) pairs.  DomainError if the sweeps fail to settle.
std::vector<std::pair<double, double>> picard_profile(double sigma_sq, double a,
                                                      double s, double t_small,
                                                      int nodes, int sweeps);

}  // namespace brw
