#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "brw/estimate.hpp"
#include "brw/laws.hpp"
#include "brw/rng.hpp"

namespace brw {

// Absorbing barriers phi(i), evaluated at integer generations i >= 1.  All
// variants are pure functions of i; the parametric ones also expose their
// asymptotic cube-root slopes
//   a+ = limsup phi(n) / n^{1/3},   a- = liminf phi(n) / n^{1/3},
// which drive the classification ladder.

// phi(i) = a i^{1/3}.
struct PowerLawBarrier {
  double a = 0.0;
};

// phi(i) = eps i.  The cube-root slopes are +inf, 0, or -inf by sign(eps).
struct LinearBarrier {
  double eps = 0.0;
};

// phi(i) = a_plus i^{1/3} at even i, a_minus i^{1/3} at odd i.
struct OscillatingParityBarrier {
  double a_plus = 0.0;
  double a_minus = 0.0;
};

// phi(i) = a_minus i^{1/3} when i is a positive power of the stride
// (stride, stride^2, ...), else a_plus i^{1/3}.  stride >= 2.
struct SparseDipBarrier {
  double a_plus = 0.0;
  double a_minus = 0.0;
  long stride = 2;
};

// Explicit values, values[i-1] = phi(i).  Evaluation beyond the table is a
// DomainError and no asymptotic slopes exist.
struct TableBarrier {
  std::vector<double> values;
};

using Barrier = std::variant<PowerLawBarrier, LinearBarrier, OscillatingParityBarrier,
                             SparseDipBarrier, TableBarrier>;

// DomainError for nonfinite parameters, stride < 2, or an empty table.
void validate_barrier(const Barrier& barrier);

double barrier_value(const Barrier& barrier, long i);

// Closed-form slopes; empty for Table barriers (finite range).
std::optional<double> barrier_a_plus(const Barrier& barrier);
std::optional<double> barrier_a_minus(const Barrier& barrier);

struct Particle {
  double position = 0.0;
  double weight = 1.0;
};

// Snapshot of the final generation reached.  Invariants: every stored
// position is <= phi(generation); weights are 1 outside the splitting
// estimator; extinct_at is the first empty generation and implies an empty
// particle list with generation == *extinct_at.
struct PopulationState {
  int generation = 0;
  std::vector<Particle> particles;
  bool truncated = false;
  std::optional<int> extinct_at;
};

// Generation-synchronous expansion under the barrier: each particle spawns
// one sampled sibling set, children strictly above phi(generation + 1) are
// discarded at birth, and a survivor count above cap is cut back to cap by a
// uniform subsample (truncated is set).  Extinction is data, not an error.
//
// Reproducibility contract: run r of an estimator draws from
// stream.derive(r); within a run the root carries node key 1, the i-th child
// of a node with key k carries key mix64(k, i) whether or not its siblings
// survive, and the sibling set of a node is drawn from the run stream's
// derive(node key).  Trajectories are therefore pure functions of
// (seed, stream id) and never depend on evaluation order or on the barrier.
//
// The law must pass criticality_check unless allow_noncritical is set.
PopulationState simulate(const OffspringLaw& law, const Barrier& barrier, int n, long cap,
                         RngStream& stream, bool allow_noncritical = false);

struct NaiveMethod {};

// Fixed-effort multilevel splitting: per macro replicate, a budget of
// runs / macro_replicates populations advances between geometric generation
// milestones round(growth^k * first_milestone); at each milestone the
// survivors are cloned back up to the budget and their weights divided by
// the clone count, so the mean surviving weight stays unbiased for the
// survival probability.  The standard error is the between-macro-replicate
// spread, which is honest across the cloning dependence within one macro.
struct SplittingMethod {
  double growth = 2.0;
  long first_milestone = 4;
  int macro_replicates = 8;
};

using SurvivalMethod = std::variant<NaiveMethod, SplittingMethod>;

struct SurvivalOptions {
  // A population reaching the cap is frozen and counted as surviving to the
  // horizon: from cap particles the chance of dying before any practical
  // horizon is negligible, and freezing (rather than subsampling onward)
  // keeps survival pathwise monotone in the barrier under shared streams.
  // cap_hits reports how often this happened so callers can raise the cap.
  long cap = 1000000;
  int workers = 1;
  bool allow_noncritical = false;
};

// P(population nonempty at generation n).  runs is the total replicate
// budget across macro replicates.  InsufficientHits (naive only) when fewer
// than 10 raw survivals arrive; that is the signal to switch to Splitting.
SurvivalEstimate survival_probability(const OffspringLaw& law, const Barrier& barrier, int n,
                                      long runs, const SurvivalMethod& method,
                                      RngStream& stream, const SurvivalOptions& options = {});

struct CensusOptions {
  double eps = 1.0;  // slack in the growth target exp(n_k^{1/3} (b - eps))
  long cap = 0;      // 0 = uncapped; a cap biases census means downward
  int workers = 1;
};

struct CensusRecord {
  int k = 0;
  long checkpoint = 0;  // generation E^k; the k = 0 row is the ancestor at 0
  double mean_count = 0.0;
  double target = 0.0;
  bool meets_target = false;
};

// Mean population surviving BOTH kill rules, above a i^{1/3} and below
// (a - b) i^{1/3}, reported at the checkpoints n_k = growth^k together with
// the growth target exp(n_k^{1/3} (b - eps)).  b defaults to the upper root
// from b_roots(sigma_sq, a); the law must be critical and a must exceed the
// critical drift.  The k = 0 row is the ancestor: checkpoint 0, count 1.
std::vector<CensusRecord> two_barrier_census(const OffspringLaw& law, double a,
                                             std::optional<double> b, int growth, int k_max,
                                             long runs, RngStream& stream,
                                             const CensusOptions& options = {});

enum class BarrierVerdict { Extinct, Survives, Unknown };

struct BarrierClassification {
  BarrierVerdict verdict = BarrierVerdict::Unknown;
  std::string reason;
};

// Decision ladder on the cube-root slopes, first rule wins:
//   1. a+ below the critical drift: Extinct.
//   2. a- above the critical drift: Survives.
//   3. parity oscillation with a- below the critical drift: Extinct.
//   4. a+ at or above critical and a- below 3 pi^2 sigma_sq / (2 b^2) with
//      b the upper root at a+: Extinct.
//   5. sparse dip with a- above that threshold and stride >= stride_min:
//      Survives (the construction is asymptotic in the stride).
// Anything else, including a barrier sitting exactly at the critical drift
// and any Table barrier, is Unknown.  The reason string names the deciding
// quantities.
BarrierClassification classify_general_barrier(double sigma_sq, const Barrier& barrier,
                                               long sparse_stride_min = 2);

struct SlopeFit {
  double c_hat = 0.0;
  double std_error = 0.0;
  double r_squared = 0.0;
};

// Weighted least squares of -log p_hat against n^{1/3} with a free
// intercept; c_hat is the slope.  Rows with p_hat <= 0 are dropped; at least
// three must remain (DomainError) at more than one n (DegenerateFit).
// Weights are (p_hat / std_error)^2 when every surviving row has a positive
// standard error, else uniform.
SlopeFit extinction_slope_fit(const std::vector<SurvivalEstimate>& estimates);

}  // namespace brw
