#pragma once

#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "brw/estimate.hpp"
#include "brw/laws.hpp"
#include "brw/rng.hpp"

namespace brw {

// One step of the reweighted single-particle walk obtained from a branching
// law whose transform equals 1 at the reweighting point.
struct StepAtom {
  double x = 0.0;
  double p = 0.0;
};

struct DiscreteAtoms {
  std::vector<StepAtom> atoms;
};

struct GaussianStep {
  double mean = 0.0;
  double variance = 1.0;
};

using TiltedStepLaw = std::variant<DiscreteAtoms, GaussianStep>;

// DomainError when atom probabilities do not sum to 1 within 1e-12, an atom
// has nonpositive probability or a non-finite position, or a Gaussian
// variance is not positive.
void validate_step_law(const TiltedStepLaw& step);

double step_mean(const TiltedStepLaw& step);
double step_variance(const TiltedStepLaw& step);
double sample_step(const TiltedStepLaw& step, RngStream& stream);

// Reweights an offspring law into its single-particle walk step.  Requires
// Phi(1) = 1 within 1e-9 (DomainError otherwise).  FiniteSupport maps to
// DiscreteAtoms with weight(x) = sum over outcomes of
// prob * multiplicity(x) * e^{-x}, normalized by the realized total so the
// probabilities sum to 1 exactly; PoissonGaussian maps to
// GaussianStep{mu - s0sq, s0sq}.  For a critical source law the step has
// mean 0 and variance Phi''(1).
TiltedStepLaw tilted_step(const OffspringLaw& law);

// Path functionals for the population/walk identity, evaluated on the n
// positions after the start.
struct One {};
struct IndicatorBelowZeroAtN {};  // 1 when the final position is <= 0
struct IndicatorTubeConstant {
  double w = 1.0;  // 1 when every position stays in [-w, w]
};
using PathFunctional = std::variant<One, IndicatorBelowZeroAtN, IndicatorTubeConstant>;

struct ManyToOneReport {
  double lhs = 0.0;  // population side: E of the e^{-position}-weighted sum
  double rhs = 0.0;  // walk side: plain expectation under the reweighted step
  double abs_diff = 0.0;
};

// Exact enumeration of both sides of the depth-n population/walk identity.
// UnsupportedLaw unless the law has finite support; DomainError unless
// 1 <= n <= 6; SizeLimit when the enumeration would exceed 1e7 leaf terms.
ManyToOneReport many_to_one_check(const OffspringLaw& law, int n,
                                  const PathFunctional& functional);

// Boundary profiles for the scaled corridor, as functions of t = i/j.
struct ConstantProfile {
  double v = 0.0;
};
struct CubeRootOffsetProfile {
  double coeff = 0.0;   // value is coeff * (t + offset)^{1/3}
  double offset = 0.0;  // must be nonnegative
};
using TubeProfile = std::variant<ConstantProfile, CubeRootOffsetProfile>;

double profile_eval(const TubeProfile& profile, double t);

// Corridor event for a j-step walk: S_i / j^{1/3} must lie in
// [lower(i/j), upper(i/j)] for every i = 1..j, and when endpoint_window is
// set, S_j / j^{1/3} must additionally land inside it.  Membership is
// checked at the steps only, never between them.  The corridor must contain
// the origin at t = 0 and the lower profile must stay strictly below the
// upper one on the step grid; allow_touching relaxes the strictness to <=.
struct TubeSpec {
  int j = 1;
  TubeProfile lower = ConstantProfile{-1.0};
  TubeProfile upper = ConstantProfile{1.0};
  std::optional<std::pair<double, double>> endpoint_window;
  bool allow_touching = false;
};

void validate_tube_spec(const TubeSpec& spec);

// Monte Carlo corridor probability with early exit at the first violation.
// Run r draws from the child stream stream.derive(r), so the estimate is a
// pure function of the stream identity and is reproducible under any
// scheduling.  When exit_histogram is non-null it is resized to j + 2 and
// slot i counts runs first leaving the corridor at step i; slot j + 1
// counts runs rejected only by the endpoint window.
SurvivalEstimate tube_probability_mc(const TiltedStepLaw& step, const TubeSpec& spec,
                                     long runs, RngStream& stream,
                                     std::vector<long>* exit_histogram = nullptr);

// Exponential cost of the corridor per unit of j^{1/3}:
// (pi^2 sigma_sq / 2) * integral over [0,1] of dt / width(t)^2.  Constant
// pairs and equal-offset cube-root pairs evaluate in closed form (the
// latter stays finite even when the width vanishes at t = 0, the integrand
// being t^{-2/3} there); every other combination uses adaptive quadrature
// to 1e-10 relative accuracy and requires the width to stay bounded away
// from 0, returning +infinity as the flagged divergent value otherwise.
double mogulskii_rate(double sigma_sq, const TubeSpec& spec);

// Exact corridor probability for an integer-atom step law: the start mass
// is pushed j times through the one-step transition restricted to
// band_lo..band_hi and the surviving mass is totaled with compensated
// summation.  UnsupportedLaw for non-integer atoms; DomainError when the
// band exceeds 1e4 states, j is outside 1..1e6, or the start lies outside
// the band.
double tube_probability_exact(const DiscreteAtoms& lattice_step, long j, long band_lo,
                              long band_hi, long start);

}  // namespace brw
