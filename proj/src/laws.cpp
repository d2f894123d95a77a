#include "brw/laws.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "brw/errors.hpp"

namespace brw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_finite_support(const FiniteSupportLaw& law) {
  if (law.outcomes.empty())
    throw DomainError("finite-support law needs at least one outcome");
  double total = 0.0;
  for (const auto& out : law.outcomes) {
    if (!(out.prob > 0.0) || out.prob > 1.0)
      throw DomainError("outcome probability must lie in (0, 1]");
    total += out.prob;
    for (double x : out.displacements)
      if (!std::isfinite(x)) throw DomainError("displacement must be finite");
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw DomainError("outcome probabilities must sum to 1 within 1e-12");
}

void validate_poisson_gaussian(const PoissonGaussianLaw& law) {
  if (!std::isfinite(law.m) || !(law.m > 0.0))
    throw DomainError("poisson mean m must be positive");
  if (!std::isfinite(law.mu)) throw DomainError("step mean mu must be finite");
  if (!std::isfinite(law.s0sq) || law.s0sq < 0.0)
    throw DomainError("step variance s0sq must be nonnegative");
}

}  // namespace

void validate_law(const OffspringLaw& law) {
  std::visit([](const auto& l) {
    using T = std::decay_t<decltype(l)>;
    if constexpr (std::is_same_v<T, FiniteSupportLaw>)
      validate_finite_support(l);
    else
      validate_poisson_gaussian(l);
  }, law);
}

std::vector<double> sample_offspring(const OffspringLaw& law, RngStream& stream) {
  if (const auto* fs = std::get_if<FiniteSupportLaw>(&law)) {
    const double u = stream.uniform();
    double acc = 0.0;
    for (const auto& out : fs->outcomes) {
      acc += out.prob;
      if (u < acc) return out.displacements;
    }
    // Rounding can leave acc marginally below 1; the last outcome absorbs it.
    return fs->outcomes.back().displacements;
  }
  const auto& pg = std::get<PoissonGaussianLaw>(law);
  const long n = stream.poisson(pg.m);
  const double sd = std::sqrt(pg.s0sq);
  std::vector<double> kids(static_cast<size_t>(n));
  for (double& x : kids) x = pg.mu + sd * stream.gaussian();
  return kids;
}

const std::vector<SiblingOutcome>& enumerate_outcomes(const OffspringLaw& law) {
  if (const auto* fs = std::get_if<FiniteSupportLaw>(&law)) return fs->outcomes;
  throw UnsupportedLaw("exact outcome enumeration needs a finite-support law");
}

bool has_negative_steps(const OffspringLaw& law) {
  if (const auto* fs = std::get_if<FiniteSupportLaw>(&law)) {
    for (const auto& out : fs->outcomes)
      for (double x : out.displacements)
        if (x < 0.0) return true;
    return false;
  }
  const auto& pg = std::get<PoissonGaussianLaw>(law);
  return pg.s0sq > 0.0 || pg.mu < 0.0;
}

LaplaceProfile::LaplaceProfile(OffspringLaw law) {
  validate_law(law);
  if (const auto* fs = std::get_if<FiniteSupportLaw>(&law)) {
    x_min_ = kInf;
    mass_at_x_min_ = 0.0;
    for (const auto& out : fs->outcomes)
      for (double x : out.displacements) x_min_ = std::min(x_min_, x);
    if (std::isfinite(x_min_)) {
      for (const auto& out : fs->outcomes)
        for (double x : out.displacements)
          if (x == x_min_) mass_at_x_min_ += out.prob;
    }
  } else {
    const auto& pg = std::get<PoissonGaussianLaw>(law);
    if (pg.s0sq > 0.0) {
      x_min_ = -kInf;
      mass_at_x_min_ = 0.0;
    } else {
      x_min_ = pg.mu;
      mass_at_x_min_ = pg.m;
    }
  }
  has_negative_steps_ = brw::has_negative_steps(law);
  zeta_ = kInf;  // finite sums of exponentials and the Gaussian transform are entire
  src_ = std::move(law);
}

LaplaceProfile LaplaceProfile::from_closed_form(ClosedFormProfile cf) {
  if (!(cf.zeta > 0.0) || !std::isfinite(cf.zeta))
    throw DomainError("closed-form profile needs a finite positive domain edge");
  if (!cf.eval) throw DomainError("closed-form profile needs an evaluator");
  LaplaceProfile p;
  p.zeta_ = cf.zeta;
  // Support data is not recoverable from pointwise transform values; the
  // finite-edge case analysis never consults it.
  p.x_min_ = std::numeric_limits<double>::quiet_NaN();
  p.mass_at_x_min_ = std::numeric_limits<double>::quiet_NaN();
  p.has_negative_steps_ = true;
  p.src_ = std::move(cf);
  return p;
}

double LaplaceProfile::phi(double t, int order) const {
  if (order < 0 || order > 2) throw DomainError("transform derivative order must be 0, 1, or 2");
  if (!(t >= 0.0) || t >= zeta_)
    throw DomainError("transform argument outside [0, zeta)");
  if (const auto* cf = std::get_if<ClosedFormProfile>(&src_)) return cf->eval(t, order);
  const auto& law = std::get<OffspringLaw>(src_);
  if (const auto* fs = std::get_if<FiniteSupportLaw>(&law)) {
    double acc = 0.0;
    for (const auto& out : fs->outcomes) {
      double inner = 0.0;
      for (double x : out.displacements) {
        double w = std::exp(-t * x);
        if (order == 1) w *= -x;
        if (order == 2) w *= x * x;
        inner += w;
      }
      acc += out.prob * inner;
    }
    return acc;
  }
  const auto& pg = std::get<PoissonGaussianLaw>(law);
  const double psi = std::log(pg.m) - t * pg.mu + 0.5 * t * t * pg.s0sq;
  const double dpsi = -pg.mu + t * pg.s0sq;
  const double value = std::exp(psi);
  if (order == 0) return value;
  if (order == 1) return dpsi * value;
  return (pg.s0sq + dpsi * dpsi) * value;
}

double LaplaceProfile::psi(double t) const { return std::log(phi(t, 0)); }

double LaplaceProfile::dpsi(double t) const {
  if (const auto* law = std::get_if<OffspringLaw>(&src_))
    if (const auto* pg = std::get_if<PoissonGaussianLaw>(law))
      return -pg->mu + t * pg->s0sq;
  return phi(t, 1) / phi(t, 0);
}

double LaplaceProfile::d2psi(double t) const {
  if (const auto* law = std::get_if<OffspringLaw>(&src_))
    if (const auto* pg = std::get_if<PoissonGaussianLaw>(law))
      return pg->s0sq;
  const double v = phi(t, 0);
  const double r = phi(t, 1) / v;
  return phi(t, 2) / v - r * r;
}

double LaplaceProfile::phi_at_zeta() const {
  const auto* cf = std::get_if<ClosedFormProfile>(&src_);
  if (!cf) throw DomainError("edge data requires a finite domain edge");
  return cf->phi_at_zeta;
}

double LaplaceProfile::dphi_at_zeta() const {
  const auto* cf = std::get_if<ClosedFormProfile>(&src_);
  if (!cf) throw DomainError("edge data requires a finite domain edge");
  return cf->dphi_at_zeta;
}

double LaplaceProfile::d2phi_at_zeta() const {
  const auto* cf = std::get_if<ClosedFormProfile>(&src_);
  if (!cf) throw DomainError("edge data requires a finite domain edge");
  return cf->d2phi_at_zeta;
}

const OffspringLaw* LaplaceProfile::law() const {
  return std::get_if<OffspringLaw>(&src_);
}

const std::string& LaplaceProfile::closed_form_name() const {
  static const std::string empty;
  const auto* cf = std::get_if<ClosedFormProfile>(&src_);
  return cf ? cf->name : empty;
}

namespace {

// Each entry keeps Phi and its first two t-derivatives exactly consistent;
// the edge fields record the (possibly divergent) limits at zeta.
std::map<std::string, ClosedFormProfile> build_profiles() {
  std::map<std::string, ClosedFormProfile> reg;
  {
    // Phi(t) = 2/(1-t): the transform itself diverges at the edge.
    ClosedFormProfile p;
    p.name = "pole";
    p.zeta = 1.0;
    p.eval = [](double t, int k) {
      const double r = 1.0 - t;
      if (k == 0) return 2.0 / r;
      if (k == 1) return 2.0 / (r * r);
      return 4.0 / (r * r * r);
    };
    p.phi_at_zeta = kInf;
    p.dphi_at_zeta = kInf;
    p.d2phi_at_zeta = kInf;
    reg[p.name] = p;
  }
  {
    // log Phi = 2 - sqrt(1-t): finite edge value, derivative blows up.
    ClosedFormProfile p;
    p.name = "steep-edge";
    p.zeta = 1.0;
    p.eval = [](double t, int k) {
      const double r = std::sqrt(1.0 - t);
      const double value = std::exp(2.0 - r);
      const double d1 = 0.5 / r;             // psi'
      if (k == 0) return value;
      if (k == 1) return d1 * value;
      const double d2 = 0.25 / (r * r * r);  // psi''
      return (d2 + d1 * d1) * value;
    };
    p.phi_at_zeta = std::exp(2.0);
    p.dphi_at_zeta = kInf;
    p.d2phi_at_zeta = kInf;
    reg[p.name] = p;
  }
  const auto quadratic = [](double shift) {
    // log Phi = t^2 + shift: everything finite at the edge.
    return [shift](double t, int k) {
      const double value = std::exp(t * t + shift);
      if (k == 0) return value;
      if (k == 1) return 2.0 * t * value;
      return (2.0 + 4.0 * t * t) * value;
    };
  };
  {
    // t psi'(t) - psi(t) = t^2 - 1/2 crosses zero inside the domain.
    ClosedFormProfile p;
    p.name = "interior-root";
    p.zeta = 1.0;
    p.eval = quadratic(0.5);
    p.phi_at_zeta = std::exp(1.5);
    p.dphi_at_zeta = 2.0 * std::exp(1.5);
    p.d2phi_at_zeta = 6.0 * std::exp(1.5);
    reg[p.name] = p;
  }
  {
    // t psi'(t) - psi(t) = t^2 - 2 stays negative on the whole domain.
    ClosedFormProfile p;
    p.name = "no-root";
    p.zeta = 1.0;
    p.eval = quadratic(2.0);
    p.phi_at_zeta = std::exp(3.0);
    p.dphi_at_zeta = 2.0 * std::exp(3.0);
    p.d2phi_at_zeta = 6.0 * std::exp(3.0);
    reg[p.name] = p;
  }
  {
    // t psi'(t) - psi(t) = t^2 - 1 vanishes exactly at the edge.
    ClosedFormProfile p;
    p.name = "boundary-root";
    p.zeta = 1.0;
    p.eval = quadratic(1.0);
    p.phi_at_zeta = std::exp(2.0);
    p.dphi_at_zeta = 2.0 * std::exp(2.0);
    p.d2phi_at_zeta = 6.0 * std::exp(2.0);
    reg[p.name] = p;
  }
  return reg;
}

const std::map<std::string, ClosedFormProfile>& profile_registry() {
  static const std::map<std::string, ClosedFormProfile> reg = build_profiles();
  return reg;
}

}  // namespace

const ClosedFormProfile& closed_form_profile(const std::string& name) {
  const auto& reg = profile_registry();
  auto it = reg.find(name);
  if (it == reg.end())
    throw ConfigError("unknown closed-form profile '" + name + "'");
  return it->second;
}

std::vector<std::string> closed_form_profile_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : profile_registry()) names.push_back(name);
  return names;
}

CriticalityReport criticality_check(const LaplaceProfile& profile, double tol) {
  if (!(profile.zeta() > 1.0))
    throw DomainError("criticality check needs the transform domain to reach past t = 1");
  CriticalityReport rep;
  rep.psi1 = profile.psi(1.0);
  rep.dpsi1 = profile.dpsi(1.0);
  rep.sigma_sq = profile.phi(1.0, 2);
  rep.is_critical = std::abs(rep.psi1) <= tol && std::abs(rep.dpsi1) <= tol;
  rep.subcritical_population = profile.phi(0.0, 0) <= 1.0;
  return rep;
}

}  // namespace brw
