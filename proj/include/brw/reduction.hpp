#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brw/laws.hpp"

namespace brw {

// Outcome of the tilting analysis.  The first two tags cover laws whose
// transform is finite everywhere; the lettered tags cover finite-edge
// profiles, split by the behaviour of Phi and Phi' at the edge and by the
// sign of zeta psi'(zeta) - psi(zeta).
enum class ReductionCase {
  ZetaInf_Reducible,
  ZetaInf_Irreducible,
  A,
  B,
  C,
  D,
  E_boundary,
};

const char* reduction_case_name(ReductionCase tag);

struct ReductionReport {
  std::optional<double> t_star;           // present iff the case admits a tilt point
  ReductionCase case_tag = ReductionCase::ZetaInf_Irreducible;
  std::optional<double> sigma_tilde_sq;   // absent when the tilted variance diverges
  std::vector<std::pair<double, double>> F_values;  // diagnostic grid of (t, psi(t)/t)
};

// Unique root of G(t) = t psi'(t) - psi(t) in (0, zeta], absent when G never
// reaches zero.  G is nondecreasing (G' = t psi''), so bracketing plus
// bisection is unconditionally safe.
std::optional<double> find_t_star(const LaplaceProfile& profile);

ReductionReport classify_reduction(const LaplaceProfile& profile);

struct TiltResult {
  OffspringLaw law;
  double sigma_tilde_sq = 0.0;  // second transform derivative of the tilted law at 1
};

// Displacement transform x -> t_star*x + psi(t_star); the result satisfies
// the criticality check by construction.  DomainError when t_star does not
// solve the tilt equation for this law.
TiltResult tilt_law(const OffspringLaw& law, double t_star);

// The tilted variance computed two ways: `direct` is the defining moment of
// the tilted law; `printed` is the unnormalized expression
// t*^2 Phi''(t*) - psi(t*)^2, which differs whenever Phi(t*) != 1.  Both are
// reported; direct is the value downstream code consumes.
struct SigmaTildeComparison {
  double direct = 0.0;
  double printed = 0.0;
};

SigmaTildeComparison sigma_tilde_comparison(const LaplaceProfile& profile, double t_star);

}  // namespace brw
