#include "brw/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "brw/errors.hpp"

namespace brw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// psi and psi' for a finite-support law via log-sum-exp, so that bracket
// expansion can probe t far beyond where Phi itself overflows.
struct StablePsi {
  std::vector<double> atoms;       // displacement values, one entry per atom
  std::vector<double> log_weight;  // log of outcome probability, repeated per atom

  static StablePsi from(const FiniteSupportLaw& fs) {
    StablePsi s;
    for (const auto& out : fs.outcomes) {
      const double lw = std::log(out.prob);
      for (double x : out.displacements) {
        s.atoms.push_back(x);
        s.log_weight.push_back(lw);
      }
    }
    return s;
  }

  // Returns {psi, dpsi}.
  std::pair<double, double> eval(double t) const {
    double peak = -kInf;
    for (size_t i = 0; i < atoms.size(); ++i)
      peak = std::max(peak, log_weight[i] - t * atoms[i]);
    double z = 0.0, zx = 0.0;
    for (size_t i = 0; i < atoms.size(); ++i) {
      const double w = std::exp(log_weight[i] - t * atoms[i] - peak);
      z += w;
      zx += w * (-atoms[i]);
    }
    return {peak + std::log(z), zx / z};
  }
};

// G(t) = t psi'(t) - psi(t), evaluated overflow-safely for law-backed
// profiles and through the registered callables otherwise.
class GEval {
 public:
  explicit GEval(const LaplaceProfile& profile) : profile_(profile) {
    if (const OffspringLaw* law = profile.law())
      if (const auto* fs = std::get_if<FiniteSupportLaw>(law))
        stable_ = StablePsi::from(*fs);
  }

  double operator()(double t) const {
    if (stable_) {
      const auto [psi, dpsi] = stable_->eval(t);
      return t * dpsi - psi;
    }
    return t * profile_.dpsi(t) - profile_.psi(t);
  }

 private:
  const LaplaceProfile& profile_;
  std::optional<StablePsi> stable_;
};

// Bisection on a sign change of the nondecreasing G; the bracket is assumed
// valid (G(lo) < 0 <= G(hi)).
double bisect_root(const GEval& g, double lo, double hi) {
  for (int i = 0; i < 200 && hi - lo > 1e-16 * std::max(1.0, lo); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::optional<double> root_in(const GEval& g, const LaplaceProfile& profile) {
  const double zeta = profile.zeta();
  // A root needs G to start negative; G(0) = -psi(0) = -log Phi(0).
  double lo = std::isfinite(zeta) ? zeta * 0x1p-30 : 0x1p-30;
  if (!(g(lo) < 0.0)) return std::nullopt;

  double hi;
  if (std::isfinite(zeta)) {
    // Approach the edge geometrically; cases A and B push G to +inf there,
    // case C has a strictly positive limit.
    hi = zeta;
    double probe = zeta * (1.0 - 0x1p-8);
    bool found = false;
    for (int i = 0; i < 60; ++i) {
      if (g(probe) >= 0.0) { hi = probe; found = true; break; }
      lo = probe;
      probe = zeta - (zeta - probe) * 0x1p-1;
    }
    if (!found) return std::nullopt;  // G(zeta-) <= 0: no interior root
  } else {
    hi = std::max(1.0, 2.0 * lo);
    bool found = false;
    for (int i = 0; i < 80; ++i) {
      if (g(hi) >= 0.0) { found = true; break; }
      lo = hi;
      hi *= 2.0;
    }
    if (!found) return std::nullopt;  // G plateaus at a nonpositive limit
  }
  return bisect_root(g, lo, hi);
}

double finite_edge_gap(const LaplaceProfile& profile) {
  // zeta psi'(zeta) - psi(zeta) from the declared edge data; +inf when the
  // derivative diverges while Phi stays finite.
  const double zeta = profile.zeta();
  const double phi_z = profile.phi_at_zeta();
  const double dphi_z = profile.dphi_at_zeta();
  if (!std::isfinite(dphi_z)) return kInf;
  return zeta * dphi_z / phi_z - std::log(phi_z);
}

std::vector<std::pair<double, double>> diagnostic_grid(const LaplaceProfile& profile) {
  std::vector<std::pair<double, double>> grid;
  const double zeta = profile.zeta();
  const double t_hi = std::isfinite(zeta) ? zeta * (1.0 - 1e-6) : 8.0;
  const double t_lo = t_hi * 1e-4;
  const int n = 17;
  const double step = std::pow(t_hi / t_lo, 1.0 / (n - 1));
  double t = t_lo;
  for (int i = 0; i < n; ++i, t *= step)
    grid.emplace_back(t, profile.psi(t) / t);
  return grid;
}

}  // namespace

const char* reduction_case_name(ReductionCase tag) {
  switch (tag) {
    case ReductionCase::ZetaInf_Reducible: return "ZetaInf_Reducible";
    case ReductionCase::ZetaInf_Irreducible: return "ZetaInf_Irreducible";
    case ReductionCase::A: return "A";
    case ReductionCase::B: return "B";
    case ReductionCase::C: return "C";
    case ReductionCase::D: return "D";
    case ReductionCase::E_boundary: return "E_boundary";
  }
  return "?";
}

std::optional<double> find_t_star(const LaplaceProfile& profile) {
  const GEval g(profile);
  auto root = root_in(g, profile);
  if (!root) return std::nullopt;
  // Residual guard: the report invariant promises |t* psi' - psi| <= 1e-9.
  const double resid = g(*root);
  if (std::abs(resid) > 1e-9 * std::max(1.0, std::abs(profile.psi(*root))))
    throw NumericalFailure("tilt-point residual did not converge");
  return root;
}

ReductionReport classify_reduction(const LaplaceProfile& profile) {
  ReductionReport rep;
  rep.F_values = diagnostic_grid(profile);

  if (!std::isfinite(profile.zeta())) {
    // A tilt point exists iff G crosses zero.  G(0) = -log Phi(0) must be
    // negative (population mean above 1) and the limit of G must be positive,
    // which fails exactly when the support minimum is finite and carries
    // intensity mass >= 1 (then G -> -log mass <= 0).
    const bool irreducible =
        (profile.x_min() > -kInf && profile.mass_at_x_min() >= 1.0) ||
        profile.phi(0.0, 0) <= 1.0;
    if (irreducible) {
      rep.case_tag = ReductionCase::ZetaInf_Irreducible;
      return rep;
    }
    rep.case_tag = ReductionCase::ZetaInf_Reducible;
    rep.t_star = find_t_star(profile);
    if (!rep.t_star)
      throw NumericalFailure(
          "support data predicts a tilt point but t psi'(t) - psi(t) never "
          "reaches zero (population mean at or below 1?)");
    rep.sigma_tilde_sq = *rep.t_star * *rep.t_star * profile.d2psi(*rep.t_star);
    return rep;
  }

  // Finite edge: branch on the declared limits at zeta.
  const double zeta = profile.zeta();
  if (!std::isfinite(profile.phi_at_zeta())) {
    rep.case_tag = ReductionCase::A;
  } else if (!std::isfinite(profile.dphi_at_zeta())) {
    rep.case_tag = ReductionCase::B;
  } else {
    const double gap = finite_edge_gap(profile);
    const double scale = std::max(1.0, std::abs(std::log(profile.phi_at_zeta())));
    if (std::abs(gap) <= 1e-12 * scale) {
      rep.case_tag = ReductionCase::E_boundary;
      rep.t_star = zeta;
      const double phi_z = profile.phi_at_zeta();
      const double d2phi_z = profile.d2phi_at_zeta();
      if (std::isfinite(d2phi_z)) {
        const double dpsi_z = profile.dphi_at_zeta() / phi_z;
        const double d2psi_z = d2phi_z / phi_z - dpsi_z * dpsi_z;
        rep.sigma_tilde_sq = zeta * zeta * d2psi_z;
      }
      return rep;
    }
    if (gap < 0.0) {
      rep.case_tag = ReductionCase::D;
      return rep;
    }
    rep.case_tag = ReductionCase::C;
  }

  rep.t_star = find_t_star(profile);
  if (!rep.t_star)
    throw NumericalFailure(
        "edge analysis predicts an interior tilt point but none was bracketed");
  rep.sigma_tilde_sq = *rep.t_star * *rep.t_star * profile.d2psi(*rep.t_star);
  return rep;
}

TiltResult tilt_law(const OffspringLaw& law, double t_star) {
  if (!(t_star > 0.0) || !std::isfinite(t_star))
    throw DomainError("tilt point must be positive and finite");
  const LaplaceProfile profile(law);
  const double psi_star = profile.psi(t_star);
  const double gap = t_star * profile.dpsi(t_star) - psi_star;
  if (std::abs(gap) > 1e-6 * std::max(1.0, std::abs(psi_star)))
    throw DomainError("t_star does not solve the tilt equation for this law");

  TiltResult result;
  if (const auto* fs = std::get_if<FiniteSupportLaw>(&law)) {
    FiniteSupportLaw tilted = *fs;
    for (auto& out : tilted.outcomes)
      for (double& x : out.displacements) x = t_star * x + psi_star;
    result.law = std::move(tilted);
  } else {
    const auto& pg = std::get<PoissonGaussianLaw>(law);
    result.law = PoissonGaussianLaw{pg.m, t_star * pg.mu + psi_star,
                                    t_star * t_star * pg.s0sq};
  }
  result.sigma_tilde_sq = LaplaceProfile(result.law).phi(1.0, 2);
  return result;
}

SigmaTildeComparison sigma_tilde_comparison(const LaplaceProfile& profile, double t_star) {
  SigmaTildeComparison cmp;
  if (const OffspringLaw* law = profile.law())
    cmp.direct = tilt_law(*law, t_star).sigma_tilde_sq;
  else
    cmp.direct = t_star * t_star * profile.d2psi(t_star);
  const double psi_star = profile.psi(t_star);
  cmp.printed = t_star * t_star * profile.phi(t_star, 2) - psi_star * psi_star;
  return cmp;
}

}  // namespace brw
