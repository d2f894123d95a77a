#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "brw/rng.hpp"

namespace brw {

// One branching event: the full sibling set produced by one individual.
// An empty displacement list is a legal outcome (no children).
struct SiblingOutcome {
  double prob = 0.0;
  std::vector<double> displacements;
};

// Finitely many outcome types with exact probabilities.  Correlated siblings
// are expressed by listing them inside one outcome.
struct FiniteSupportLaw {
  std::vector<SiblingOutcome> outcomes;
};

// Poisson(m) children, each displaced by an independent N(mu, s0sq) step.
struct PoissonGaussianLaw {
  double m = 1.0;
  double mu = 0.0;
  double s0sq = 1.0;
};

using OffspringLaw = std::variant<FiniteSupportLaw, PoissonGaussianLaw>;

// Throws DomainError when probabilities do not sum to 1 (within 1e-12),
// a probability is outside (0,1], or a parameter is out of range.
void validate_law(const OffspringLaw& law);

std::vector<double> sample_offspring(const OffspringLaw& law, RngStream& stream);

// Exact outcome list; UnsupportedLaw for the Poisson-Gaussian variant.
const std::vector<SiblingOutcome>& enumerate_outcomes(const OffspringLaw& law);

bool has_negative_steps(const OffspringLaw& law);

// A transform profile supplied directly as callables, for laws whose
// transform has a finite domain edge.  The edge behaviour (values of the
// transform and its derivatives at zeta, possibly infinite) must be declared
// because no pointwise evaluation can recover it.
struct ClosedFormProfile {
  std::string name;
  double zeta = 0.0;                              // finite domain edge
  std::function<double(double, int)> eval;        // orders 0..2 on (0, zeta)
  double phi_at_zeta = 0.0;                       // may be +infinity
  double dphi_at_zeta = 0.0;                      // may be +infinity
  double d2phi_at_zeta = 0.0;                     // may be +infinity
};

// Built-in closed-form profiles selectable by name in configs and tests.
// Names describe the edge behaviour of the transform.  Throws ConfigError
// for unknown names.
const ClosedFormProfile& closed_form_profile(const std::string& name);
std::vector<std::string> closed_form_profile_names();

// The transform Phi(t) = E[sum over children of e^{-t xi}] together with its
// first two derivatives, the domain bound zeta, and the support data of the
// intensity measure.  Derivative convention: phi(t, k) is the k-th
// t-derivative of Phi, i.e. sum of (-x)^k e^{-t x} against the intensity
// measure.
class LaplaceProfile {
 public:
  explicit LaplaceProfile(OffspringLaw law);
  static LaplaceProfile from_closed_form(ClosedFormProfile cf);

  double phi(double t, int order = 0) const;
  double psi(double t) const;    // log Phi
  double dpsi(double t) const;   // Phi'/Phi
  double d2psi(double t) const;  // (log Phi)''

  double zeta() const { return zeta_; }
  double x_min() const { return x_min_; }
  double mass_at_x_min() const { return mass_at_x_min_; }
  bool has_negative_steps() const { return has_negative_steps_; }

  // Edge data at zeta, +infinity when the corresponding limit diverges.
  // Meaningful only when zeta is finite.
  double phi_at_zeta() const;
  double dphi_at_zeta() const;
  double d2phi_at_zeta() const;

  const OffspringLaw* law() const;   // null for closed-form profiles
  bool closed_form() const { return std::holds_alternative<ClosedFormProfile>(src_); }
  const std::string& closed_form_name() const;

 private:
  LaplaceProfile() = default;
  std::variant<OffspringLaw, ClosedFormProfile> src_;
  double zeta_ = 0.0;
  double x_min_ = 0.0;
  double mass_at_x_min_ = 0.0;
  bool has_negative_steps_ = false;
};

struct CriticalityReport {
  bool is_critical = false;
  double psi1 = 0.0;      // Psi(1)
  double dpsi1 = 0.0;     // Psi'(1)
  double sigma_sq = 0.0;  // Phi''(1); the walk variance only when critical
  bool subcritical_population = false;  // Phi(0) <= 1
};

// is_critical iff |Psi(1)| <= tol and |Psi'(1)| <= tol.  DomainError if the
// transform's domain does not reach past t = 1.
CriticalityReport criticality_check(const LaplaceProfile& profile, double tol = 1e-9);

}  // namespace brw
