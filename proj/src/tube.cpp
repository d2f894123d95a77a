#include "brw/tube.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <type_traits>
#include <vector>

#include "brw/errors.hpp"

namespace brw {

namespace {

constexpr double kAtomSumTol = 1e-12;
constexpr double kUnitTransformTol = 1e-9;

// Neumaier variant: the compensation also covers the case where the next
// term dwarfs the running sum.
double compensated_total(const std::vector<double>& values) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : values) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace

void validate_step_law(const TiltedStepLaw& step) {
  if (const auto* d = std::get_if<DiscreteAtoms>(&step)) {
    if (d->atoms.empty()) throw DomainError("step law needs at least one atom");
    double sum = 0.0;
    for (const auto& a : d->atoms) {
      if (!(a.p > 0.0) || !std::isfinite(a.x))
        throw DomainError("step atoms need positive probability and finite position");
      sum += a.p;
    }
    if (std::abs(sum - 1.0) > kAtomSumTol)
      throw DomainError("step atom probabilities must sum to 1");
  } else {
    const auto& g = std::get<GaussianStep>(step);
    if (!(g.variance > 0.0) || !std::isfinite(g.mean) || !std::isfinite(g.variance))
      throw DomainError("Gaussian step needs a finite mean and positive variance");
  }
}

double step_mean(const TiltedStepLaw& step) {
  if (const auto* d = std::get_if<DiscreteAtoms>(&step)) {
    double m = 0.0;
    for (const auto& a : d->atoms) m += a.p * a.x;
    return m;
  }
  return std::get<GaussianStep>(step).mean;
}

double step_variance(const TiltedStepLaw& step) {
  if (const auto* d = std::get_if<DiscreteAtoms>(&step)) {
    const double m = step_mean(step);
    double v = 0.0;
    for (const auto& a : d->atoms) v += a.p * (a.x - m) * (a.x - m);
    return v;
  }
  return std::get<GaussianStep>(step).variance;
}

double sample_step(const TiltedStepLaw& step, RngStream& stream) {
  if (const auto* d = std::get_if<DiscreteAtoms>(&step)) {
    const double u = stream.uniform();
    double c = 0.0;
    for (const auto& a : d->atoms) {
      c += a.p;
      if (u < c) return a.x;
    }
    return d->atoms.back().x;
  }
  const auto& g = std::get<GaussianStep>(step);
  return g.mean + std::sqrt(g.variance) * stream.gaussian();
}

TiltedStepLaw tilted_step(const OffspringLaw& law) {
  const LaplaceProfile profile{law};
  if (std::abs(profile.phi(1.0) - 1.0) > kUnitTransformTol)
    throw DomainError("reweighting needs the transform to equal 1 at t = 1");
  if (const auto* pg = std::get_if<PoissonGaussianLaw>(&law))
    return GaussianStep{pg->mu - pg->s0sq, pg->s0sq};
  std::map<double, double> weight;
  for (const auto& outcome : enumerate_outcomes(law))
    for (double x : outcome.displacements) weight[x] += outcome.prob * std::exp(-x);
  double total = 0.0;
  for (const auto& [x, p] : weight) total += p;
  DiscreteAtoms out;
  out.atoms.reserve(weight.size());
  for (const auto& [x, p] : weight) out.atoms.push_back({x, p / total});
  return out;
}

namespace {

double functional_leaf(const PathFunctional& f, double final_pos, bool tube_ok) {
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, One>) {
          return 1.0;
        } else if constexpr (std::is_same_v<T, IndicatorBelowZeroAtN>) {
          return final_pos <= 0.0 ? 1.0 : 0.0;
        } else {
          return tube_ok ? 1.0 : 0.0;
        }
      },
      f);
}

// E over the branching tree of the e^{-position}-weighted sum of F across
// depth-n individuals.  Children below a tube-violating position are pruned
// because F vanishes on every completion of their path.
double population_side(const std::vector<SiblingOutcome>& outcomes, const PathFunctional& f,
                       const IndicatorTubeConstant* tube, int depth, int n, double pos,
                       bool tube_ok) {
  if (depth == n) return std::exp(-pos) * functional_leaf(f, pos, tube_ok);
  double total = 0.0;
  for (const auto& o : outcomes)
    for (double dx : o.displacements) {
      const double child = pos + dx;
      const bool ok = tube_ok && (tube == nullptr || std::abs(child) <= tube->w);
      if (tube != nullptr && !ok) continue;
      total += o.prob * population_side(outcomes, f, tube, depth + 1, n, child, ok);
    }
  return total;
}

double walk_side(const std::vector<StepAtom>& atoms, const PathFunctional& f,
                 const IndicatorTubeConstant* tube, int depth, int n, double pos,
                 bool tube_ok) {
  if (depth == n) return functional_leaf(f, pos, tube_ok);
  double total = 0.0;
  for (const auto& a : atoms) {
    const double next = pos + a.x;
    const bool ok = tube_ok && (tube == nullptr || std::abs(next) <= tube->w);
    if (tube != nullptr && !ok) continue;
    total += a.p * walk_side(atoms, f, tube, depth + 1, n, next, ok);
  }
  return total;
}

}  // namespace

ManyToOneReport many_to_one_check(const OffspringLaw& law, int n,
                                  const PathFunctional& functional) {
  if (!std::holds_alternative<FiniteSupportLaw>(law))
    throw UnsupportedLaw("exact enumeration needs a finite-support law");
  if (n < 1 || n > 6) throw DomainError("enumeration depth must be in 1..6");
  const auto& outcomes = enumerate_outcomes(law);
  double branch = 0.0;
  for (const auto& o : outcomes) branch += static_cast<double>(o.displacements.size());
  if (std::pow(branch, n) > 1e7)
    throw SizeLimit("outcome tree exceeds the 1e7-leaf enumeration budget");
  const auto step = tilted_step(law);
  const auto& atoms = std::get<DiscreteAtoms>(step).atoms;
  const auto* tube = std::get_if<IndicatorTubeConstant>(&functional);
  ManyToOneReport report;
  report.lhs = population_side(outcomes, functional, tube, 0, n, 0.0, true);
  report.rhs = walk_side(atoms, functional, tube, 0, n, 0.0, true);
  report.abs_diff = std::abs(report.lhs - report.rhs);
  return report;
}

double profile_eval(const TubeProfile& profile, double t) {
  if (const auto* c = std::get_if<ConstantProfile>(&profile)) return c->v;
  const auto& cr = std::get<CubeRootOffsetProfile>(profile);
  return cr.coeff * std::cbrt(t + cr.offset);
}

namespace {

void check_profile(const TubeProfile& p) {
  if (const auto* cr = std::get_if<CubeRootOffsetProfile>(&p)) {
    if (!std::isfinite(cr->coeff) || !(cr->offset >= 0.0))
      throw DomainError("cube-root profile needs a finite coefficient and offset >= 0");
  } else if (!std::isfinite(std::get<ConstantProfile>(p).v)) {
    throw DomainError("constant profile must be finite");
  }
}

}  // namespace

void validate_tube_spec(const TubeSpec& spec) {
  if (spec.j < 1) throw DomainError("corridor needs at least one step");
  check_profile(spec.lower);
  check_profile(spec.upper);
  if (!(profile_eval(spec.lower, 0.0) <= 0.0 && 0.0 <= profile_eval(spec.upper, 0.0)))
    throw DomainError("corridor must contain the origin at t = 0");
  for (int i = 0; i <= spec.j; ++i) {
    const double t = static_cast<double>(i) / spec.j;
    const double lo = profile_eval(spec.lower, t);
    const double hi = profile_eval(spec.upper, t);
    if (lo > hi || (lo == hi && !spec.allow_touching))
      throw DomainError("lower profile must stay below the upper profile");
  }
  if (spec.endpoint_window &&
      !(spec.endpoint_window->first <= spec.endpoint_window->second))
    throw DomainError("endpoint window must be an ordered pair");
}

SurvivalEstimate tube_probability_mc(const TiltedStepLaw& step, const TubeSpec& spec,
                                     long runs, RngStream& stream,
                                     std::vector<long>* exit_histogram) {
  validate_step_law(step);
  validate_tube_spec(spec);
  if (runs < 1) throw DomainError("need at least one run");
  const int j = spec.j;
  const double j_cbrt = std::cbrt(static_cast<double>(j));
  std::vector<double> lo(static_cast<std::size_t>(j) + 1);
  std::vector<double> hi(static_cast<std::size_t>(j) + 1);
  for (int i = 1; i <= j; ++i) {
    const double t = static_cast<double>(i) / j;
    lo[static_cast<std::size_t>(i)] = profile_eval(spec.lower, t);
    hi[static_cast<std::size_t>(i)] = profile_eval(spec.upper, t);
  }
  if (exit_histogram) exit_histogram->assign(static_cast<std::size_t>(j) + 2, 0);

  const auto* atoms = std::get_if<DiscreteAtoms>(&step);
  std::vector<double> cdf;
  if (atoms) {
    double c = 0.0;
    for (const auto& a : atoms->atoms) cdf.push_back(c += a.p);
  }
  const auto* gauss = std::get_if<GaussianStep>(&step);
  const double gauss_sd = gauss ? std::sqrt(gauss->variance) : 0.0;

  long hits = 0;
  for (long r = 0; r < runs; ++r) {
    RngStream rs = stream.derive(static_cast<std::uint64_t>(r));
    double walk = 0.0;
    int exit_at = 0;
    for (int i = 1; i <= j; ++i) {
      if (atoms) {
        const double u = rs.uniform();
        std::size_t k = 0;
        while (k + 1 < cdf.size() && u >= cdf[k]) ++k;
        walk += atoms->atoms[k].x;
      } else {
        walk += gauss->mean + gauss_sd * rs.gaussian();
      }
      const double scaled = walk / j_cbrt;
      if (scaled < lo[static_cast<std::size_t>(i)] ||
          scaled > hi[static_cast<std::size_t>(i)]) {
        exit_at = i;
        break;
      }
    }
    if (exit_at == 0 && spec.endpoint_window) {
      const double scaled = walk / j_cbrt;
      if (scaled < spec.endpoint_window->first || scaled > spec.endpoint_window->second)
        exit_at = j + 1;
    }
    if (exit_at == 0)
      ++hits;
    else if (exit_histogram)
      ++(*exit_histogram)[static_cast<std::size_t>(exit_at)];
  }

  const double p = static_cast<double>(hits) / static_cast<double>(runs);
  SurvivalEstimate out;
  out.n = j;
  out.p_hat = p;
  out.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(runs));
  out.runs = runs;
  out.method = EstimateMethod::Naive;
  out.cap_hits = 0;
  return out;
}

namespace {

// Adaptive Simpson with the usual one-level Richardson correction; tol is
// an absolute budget for this interval.
template <typename F>
double simpson_refine(const F& f, double a, double fa, double m, double fm, double b,
                      double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) throw ToleranceNotMet("corridor rate quadrature stalled");
  return simpson_refine(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
         simpson_refine(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double mogulskii_rate(double sigma_sq, const TubeSpec& spec) {
  if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq))
    throw DomainError("sigma_sq must be positive");
  validate_tube_spec(spec);
  const double inf = std::numeric_limits<double>::infinity();
  const double front = 0.5 * std::numbers::pi * std::numbers::pi * sigma_sq;

  const auto* cl = std::get_if<ConstantProfile>(&spec.lower);
  const auto* cu = std::get_if<ConstantProfile>(&spec.upper);
  if (cl && cu) {
    const double w = cu->v - cl->v;
    return w > 0.0 ? front / (w * w) : inf;
  }
  const auto* rl = std::get_if<CubeRootOffsetProfile>(&spec.lower);
  const auto* ru = std::get_if<CubeRootOffsetProfile>(&spec.upper);
  if (rl && ru && rl->offset == ru->offset) {
    // width b (t + d)^{1/3}: the integrand (t + d)^{-2/3} has the exact
    // antiderivative 3 (t + d)^{1/3}, finite even for d = 0
    const double b = ru->coeff - rl->coeff;
    if (!(b > 0.0)) return inf;
    const double d = rl->offset;
    return front * 3.0 * (std::cbrt(1.0 + d) - std::cbrt(d)) / (b * b);
  }

  const auto width = [&](double t) {
    return profile_eval(spec.upper, t) - profile_eval(spec.lower, t);
  };
  constexpr int kScan = 4096;
  double wmin = inf;
  for (int i = 0; i <= kScan; ++i)
    wmin = std::min(wmin, width(static_cast<double>(i) / kScan));
  if (wmin < 0.0) throw DomainError("profiles cross inside the unit span");
  if (wmin == 0.0) return inf;

  const auto f = [&](double t) {
    const double w = width(t);
    return 1.0 / (w * w);
  };
  constexpr int kPanels = 64;
  double rough = 0.0;
  for (int i = 0; i < kPanels; ++i) {
    const double a = static_cast<double>(i) / kPanels;
    const double b = static_cast<double>(i + 1) / kPanels;
    const double m = 0.5 * (a + b);
    rough += (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
  }
  const double tol = 1e-10 * rough / kPanels;
  double total = 0.0;
  for (int i = 0; i < kPanels; ++i) {
    const double a = static_cast<double>(i) / kPanels;
    const double b = static_cast<double>(i + 1) / kPanels;
    const double m = 0.5 * (a + b);
    const double fa = f(a);
    const double fm = f(m);
    const double fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    total += simpson_refine(f, a, fa, m, fm, b, fb, whole, tol, 44);
  }
  return front * total;
}

double tube_probability_exact(const DiscreteAtoms& lattice_step, long j, long band_lo,
                              long band_hi, long start) {
  validate_step_law(TiltedStepLaw{lattice_step});
  std::vector<long> moves;
  std::vector<double> probs;
  for (const auto& a : lattice_step.atoms) {
    if (a.x != std::nearbyint(a.x) || std::abs(a.x) > 1e9)
      throw UnsupportedLaw("exact corridor oracle needs integer step atoms");
    moves.push_back(static_cast<long>(a.x));
    probs.push_back(a.p);
  }
  if (band_hi < band_lo) throw DomainError("band must be a nonempty interval");
  const long width = band_hi - band_lo + 1;
  if (width > 10000) throw DomainError("band exceeds 1e4 states");
  if (j < 1 || j > 1000000) throw DomainError("step count must be in 1..1e6");
  if (start < band_lo || start > band_hi)
    throw DomainError("start must lie inside the band");

  std::vector<double> mass(static_cast<std::size_t>(width), 0.0);
  std::vector<double> next(static_cast<std::size_t>(width));
  mass[static_cast<std::size_t>(start - band_lo)] = 1.0;
  for (long s = 0; s < j; ++s) {
    std::fill(next.begin(), next.end(), 0.0);
    for (long x = 0; x < width; ++x) {
      const double m = mass[static_cast<std::size_t>(x)];
      if (m == 0.0) continue;
      for (std::size_t k = 0; k < moves.size(); ++k) {
        const long y = x + moves[k];
        if (y >= 0 && y < width) next[static_cast<std::size_t>(y)] += m * probs[k];
      }
    }
    mass.swap(next);
  }
  return compensated_total(mass);
}

}  // namespace brw
