#include "brw/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <thread>
#include <utility>

#include "brw/constants.hpp"
#include "brw/errors.hpp"

namespace brw {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Tag namespace separating cap-subsample draws from node keys.
constexpr std::uint64_t kShuffleTag = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kMacroTag = 0xa0761d6478bd642full;

struct Node {
  double pos;
  std::uint64_t key;
};

bool is_stride_power(long i, long stride) {
  if (i < stride) return false;
  long p = stride;
  while (p < i && p <= i / stride) p *= stride;
  return p == i;
}

// One synchronous generation step.  Children are keyed by birth order before
// any kill test, so keys never depend on the barrier or the cap; that is
// what makes shared-stream runs pathwise comparable across barriers.  The
// per-node draw order matches sample_offspring: one uniform for a
// finite-support outcome pick, or one Poisson count followed by one gaussian
// per child.
void advance(const OffspringLaw& law, const RngStream& run_stream,
             const std::vector<Node>& parents, double upper, const double* lower,
             std::vector<Node>& children) {
  children.clear();
  if (const auto* fs = std::get_if<FiniteSupportLaw>(&law)) {
    for (const Node& parent : parents) {
      RngStream node_stream = run_stream.derive(parent.key);
      const double u = node_stream.uniform();
      double acc = 0.0;
      const SiblingOutcome* pick = &fs->outcomes.back();
      for (const auto& out : fs->outcomes) {
        acc += out.prob;
        if (u < acc) {
          pick = &out;
          break;
        }
      }
      std::uint64_t index = 0;
      for (const double dx : pick->displacements) {
        const double pos = parent.pos + dx;
        const std::uint64_t key = mix64(parent.key, index++);
        if (pos > upper) continue;
        if (lower != nullptr && pos < *lower) continue;
        children.push_back({pos, key});
      }
    }
    return;
  }
  const auto& pg = std::get<PoissonGaussianLaw>(law);
  const double sd = std::sqrt(pg.s0sq);
  for (const Node& parent : parents) {
    RngStream node_stream = run_stream.derive(parent.key);
    const long count = node_stream.poisson(pg.m);
    for (long i = 0; i < count; ++i) {
      const double pos = parent.pos + pg.mu + sd * node_stream.gaussian();
      const std::uint64_t key = mix64(parent.key, static_cast<std::uint64_t>(i));
      if (pos > upper) continue;
      if (lower != nullptr && pos < *lower) continue;
      children.push_back({pos, key});
    }
  }
}

// Uniform subsample to cap elements, partial Fisher-Yates on a dedicated
// stream so the selection never perturbs offspring draws.
void subsample(std::vector<Node>& nodes, long cap, RngStream shuffle) {
  const size_t m = nodes.size();
  for (size_t i = 0; i < static_cast<size_t>(cap); ++i) {
    const size_t span = m - i;
    size_t j = i + static_cast<size_t>(shuffle.uniform() * static_cast<double>(span));
    if (j >= m) j = m - 1;
    std::swap(nodes[i], nodes[j]);
  }
  nodes.resize(static_cast<size_t>(cap));
}

void require_critical(const OffspringLaw& law, bool allow_noncritical) {
  validate_law(law);
  if (allow_noncritical) return;
  const CriticalityReport rep = criticality_check(LaplaceProfile(law));
  if (!rep.is_critical) {
    throw DomainError(
        "offspring law is not critical (transform or its slope off 1 at t = 1); "
        "set allow_noncritical to simulate it anyway");
  }
}

// A single population advanced under one barrier.  Reaching the cap freezes
// the replicate as alive for every remaining generation: a cap-sized
// population's extinction chance is negligible at any practical horizon,
// and freezing preserves pathwise monotonicity in the barrier where
// subsample-and-continue would not.
struct Replicate {
  explicit Replicate(RngStream stream) : rs(std::move(stream)) { nodes.push_back({0.0, 1}); }

  std::vector<Node> nodes;
  RngStream rs;
  double weight = 1.0;
  bool frozen = false;
  bool dead = false;
};

void advance_replicate(const OffspringLaw& law, const Barrier& barrier, Replicate& rep,
                       int g_start, int g_end, long cap, long& cap_hits) {
  if (rep.dead || rep.frozen) return;
  std::vector<Node> next;
  for (int g = g_start; g < g_end; ++g) {
    const double upper = barrier_value(barrier, g + 1);
    advance(law, rep.rs, rep.nodes, upper, nullptr, next);
    rep.nodes.swap(next);
    if (rep.nodes.empty()) {
      rep.dead = true;
      return;
    }
    if (static_cast<long>(rep.nodes.size()) >= cap) {
      rep.frozen = true;
      ++cap_hits;
      rep.nodes.clear();
      rep.nodes.shrink_to_fit();
      return;
    }
  }
}

struct NaiveShard {
  long hits = 0;
  long cap_hits = 0;
};

NaiveShard naive_shard(const OffspringLaw& law, const Barrier& barrier, int n, long runs,
                       const RngStream& stream, long cap, int worker, int workers) {
  NaiveShard acc;
  for (long r = worker; r < runs; r += workers) {
    Replicate rep(stream.derive(static_cast<std::uint64_t>(r)));
    advance_replicate(law, barrier, rep, 0, n, cap, acc.cap_hits);
    if (!rep.dead) ++acc.hits;
  }
  return acc;
}

std::vector<int> splitting_milestones(const SplittingMethod& method, int n) {
  std::vector<int> milestones;
  double level = static_cast<double>(method.first_milestone);
  while (milestones.size() < 64) {
    const long m = std::lround(level);
    if (m >= n) break;
    if (m >= 1 && (milestones.empty() || m > milestones.back())) {
      milestones.push_back(static_cast<int>(m));
    }
    level *= method.growth;
  }
  milestones.push_back(n);
  return milestones;
}

struct MacroResult {
  double p = 0.0;
  long cap_hits = 0;
};

// One macro replicate of the fixed-effort splitting estimator.  Cloning
// divides each clone's weight by its clone count, so the survivor weight sum
// is conserved in expectation through every milestone regardless of how the
// budget splits among survivors; the estimate is the mean surviving weight.
MacroResult splitting_macro(const OffspringLaw& law, const Barrier& barrier, int n,
                            long budget, const std::vector<int>& milestones,
                            const RngStream& stream, int macro_index, long cap) {
  MacroResult result;
  const std::uint64_t macro_tag = mix64(kMacroTag, static_cast<std::uint64_t>(macro_index));
  std::uint64_t next_id = 0;
  auto fresh_stream = [&stream, macro_tag, &next_id]() {
    return stream.derive(mix64(macro_tag, next_id++));
  };

  std::vector<Replicate> reps;
  reps.reserve(static_cast<size_t>(budget));
  for (long i = 0; i < budget; ++i) reps.emplace_back(fresh_stream());

  int g = 0;
  for (size_t seg = 0; seg < milestones.size(); ++seg) {
    const int g_end = milestones[seg];
    for (auto& rep : reps) advance_replicate(law, barrier, rep, g, g_end, cap, result.cap_hits);
    g = g_end;
    if (g == n) break;

    std::vector<const Replicate*> alive;
    alive.reserve(reps.size());
    for (const auto& rep : reps)
      if (!rep.dead) alive.push_back(&rep);
    if (alive.empty()) return result;

    const long s = static_cast<long>(alive.size());
    const long base = budget / s;
    const long extra = budget % s;
    std::vector<Replicate> next;
    next.reserve(static_cast<size_t>(budget));
    for (long j = 0; j < s; ++j) {
      const long copies = base + (j < extra ? 1 : 0);
      for (long c = 0; c < copies; ++c) {
        Replicate clone = *alive[static_cast<size_t>(j)];
        clone.weight = alive[static_cast<size_t>(j)]->weight / static_cast<double>(copies);
        clone.rs = fresh_stream();
        next.push_back(std::move(clone));
      }
    }
    reps.swap(next);
  }

  double total = 0.0;
  for (const auto& rep : reps)
    if (!rep.dead) total += rep.weight;
  result.p = total / static_cast<double>(budget);
  return result;
}

template <typename Fn>
void run_sharded(int workers, Fn&& shard_body) {
  if (workers <= 1) {
    shard_body(0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers - 1));
  for (int w = 1; w < workers; ++w) pool.emplace_back([&shard_body, w] { shard_body(w); });
  shard_body(0);
  for (auto& t : pool) t.join();
}

}  // namespace

void validate_barrier(const Barrier& barrier) {
  const bool ok = std::visit(
      [](const auto& b) -> bool {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, PowerLawBarrier>) {
          return std::isfinite(b.a);
        } else if constexpr (std::is_same_v<T, LinearBarrier>) {
          return std::isfinite(b.eps);
        } else if constexpr (std::is_same_v<T, OscillatingParityBarrier>) {
          return std::isfinite(b.a_plus) && std::isfinite(b.a_minus);
        } else if constexpr (std::is_same_v<T, SparseDipBarrier>) {
          return std::isfinite(b.a_plus) && std::isfinite(b.a_minus) && b.stride >= 2;
        } else {
          return !b.values.empty();
        }
      },
      barrier);
  if (!ok) throw DomainError("barrier parameters must be finite (stride >= 2, table nonempty)");
}

double barrier_value(const Barrier& barrier, long i) {
  if (i < 1) throw DomainError("barriers are defined from generation 1");
  validate_barrier(barrier);
  const double t = std::cbrt(static_cast<double>(i));
  return std::visit(
      [i, t](const auto& b) -> double {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, PowerLawBarrier>) {
          return b.a * t;
        } else if constexpr (std::is_same_v<T, LinearBarrier>) {
          return b.eps * static_cast<double>(i);
        } else if constexpr (std::is_same_v<T, OscillatingParityBarrier>) {
          return (i % 2 == 0 ? b.a_plus : b.a_minus) * t;
        } else if constexpr (std::is_same_v<T, SparseDipBarrier>) {
          return (is_stride_power(i, b.stride) ? b.a_minus : b.a_plus) * t;
        } else {
          if (static_cast<size_t>(i) > b.values.size()) {
            throw DomainError("table barrier has no value at generation " + std::to_string(i));
          }
          return b.values[static_cast<size_t>(i - 1)];
        }
      },
      barrier);
}

std::optional<double> barrier_a_plus(const Barrier& barrier) {
  validate_barrier(barrier);
  return std::visit(
      [](const auto& b) -> std::optional<double> {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, PowerLawBarrier>) {
          return b.a;
        } else if constexpr (std::is_same_v<T, LinearBarrier>) {
          if (b.eps == 0.0) return 0.0;
          return b.eps > 0.0 ? std::numeric_limits<double>::infinity()
                             : -std::numeric_limits<double>::infinity();
        } else if constexpr (std::is_same_v<T, OscillatingParityBarrier>) {
          return std::max(b.a_plus, b.a_minus);
        } else if constexpr (std::is_same_v<T, SparseDipBarrier>) {
          return std::max(b.a_plus, b.a_minus);
        } else {
          return std::nullopt;
        }
      },
      barrier);
}

std::optional<double> barrier_a_minus(const Barrier& barrier) {
  validate_barrier(barrier);
  return std::visit(
      [](const auto& b) -> std::optional<double> {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, PowerLawBarrier>) {
          return b.a;
        } else if constexpr (std::is_same_v<T, LinearBarrier>) {
          if (b.eps == 0.0) return 0.0;
          return b.eps > 0.0 ? std::numeric_limits<double>::infinity()
                             : -std::numeric_limits<double>::infinity();
        } else if constexpr (std::is_same_v<T, OscillatingParityBarrier>) {
          return std::min(b.a_plus, b.a_minus);
        } else if constexpr (std::is_same_v<T, SparseDipBarrier>) {
          return std::min(b.a_plus, b.a_minus);
        } else {
          return std::nullopt;
        }
      },
      barrier);
}

PopulationState simulate(const OffspringLaw& law, const Barrier& barrier, int n, long cap,
                         RngStream& stream, bool allow_noncritical) {
  validate_barrier(barrier);
  require_critical(law, allow_noncritical);
  if (n < 0) throw DomainError("generation horizon must be >= 0");
  if (cap < 1) throw DomainError("population cap must be >= 1");

  PopulationState out;
  std::vector<Node> cur{{0.0, 1}};
  std::vector<Node> next;
  for (int g = 0; g < n; ++g) {
    const double upper = barrier_value(barrier, g + 1);
    advance(law, stream, cur, upper, nullptr, next);
    cur.swap(next);
    if (cur.empty()) {
      out.generation = g + 1;
      out.extinct_at = g + 1;
      return out;
    }
    if (static_cast<long>(cur.size()) > cap) {
      subsample(cur, cap,
                stream.derive(mix64(kShuffleTag, static_cast<std::uint64_t>(g + 1))));
      out.truncated = true;
    }
  }
  out.generation = n;
  out.particles.reserve(cur.size());
  for (const Node& node : cur) out.particles.push_back({node.pos, 1.0});
  return out;
}

SurvivalEstimate survival_probability(const OffspringLaw& law, const Barrier& barrier, int n,
                                      long runs, const SurvivalMethod& method,
                                      RngStream& stream, const SurvivalOptions& options) {
  validate_barrier(barrier);
  require_critical(law, options.allow_noncritical);
  if (n < 1) throw DomainError("survival horizon must be >= 1");
  if (runs < 100) throw DomainError("survival estimation needs at least 100 runs");
  if (options.cap < 1) throw DomainError("population cap must be >= 1");
  if (options.workers < 1) throw DomainError("worker count must be >= 1");
  // Total evaluation up front so worker threads never see a throwing
  // barrier (Table barriers shorter than the horizon).
  (void)barrier_value(barrier, n);

  SurvivalEstimate est;
  est.n = n;
  est.runs = runs;

  if (std::holds_alternative<NaiveMethod>(method)) {
    est.method = EstimateMethod::Naive;
    const int workers = static_cast<int>(std::min<long>(options.workers, runs));
    std::vector<NaiveShard> parts(static_cast<size_t>(workers));
    run_sharded(workers, [&](int w) {
      parts[static_cast<size_t>(w)] =
          naive_shard(law, barrier, n, runs, stream, options.cap, w, workers);
    });
    long hits = 0;
    for (const auto& part : parts) {
      hits += part.hits;
      est.cap_hits += part.cap_hits;
    }
    if (hits < 10) {
      throw InsufficientHits("only " + std::to_string(hits) + " of " + std::to_string(runs) +
                             " runs survived; the naive estimator is unusable this deep, "
                             "switch to the splitting method");
    }
    est.p_hat = static_cast<double>(hits) / static_cast<double>(runs);
    est.std_error = std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(runs));
    return est;
  }

  const auto& split = std::get<SplittingMethod>(method);
  if (!(split.growth > 1.0) || !std::isfinite(split.growth)) {
    throw DomainError("splitting milestone growth must exceed 1");
  }
  if (split.first_milestone < 1) throw DomainError("first splitting milestone must be >= 1");
  if (split.macro_replicates < 2) {
    throw DomainError("the splitting standard error needs at least 2 macro replicates");
  }
  const int macros = split.macro_replicates;
  const long budget = runs / macros;
  if (budget < 1) throw DomainError("runs must cover at least one replicate per macro");

  est.method = EstimateMethod::Splitting;
  const std::vector<int> milestones = splitting_milestones(split, n);
  const int workers = std::min(options.workers, macros);
  std::vector<MacroResult> results(static_cast<size_t>(macros));
  run_sharded(workers, [&](int w) {
    for (int m = w; m < macros; m += workers) {
      results[static_cast<size_t>(m)] =
          splitting_macro(law, barrier, n, budget, milestones, stream, m, options.cap);
    }
  });

  double mean = 0.0;
  for (const auto& r : results) {
    mean += r.p;
    est.cap_hits += r.cap_hits;
  }
  mean /= static_cast<double>(macros);
  double var = 0.0;
  for (const auto& r : results) var += (r.p - mean) * (r.p - mean);
  var /= static_cast<double>(macros - 1);
  est.p_hat = mean;
  est.std_error = std::sqrt(var / static_cast<double>(macros));
  return est;
}

std::vector<CensusRecord> two_barrier_census(const OffspringLaw& law, double a,
                                             std::optional<double> b, int growth, int k_max,
                                             long runs, RngStream& stream,
                                             const CensusOptions& options) {
  validate_law(law);
  const CriticalityReport rep = criticality_check(LaplaceProfile(law));
  if (!rep.is_critical) throw DomainError("the two-barrier census needs a critical law");
  const double a_c = a_critical(rep.sigma_sq);
  if (!(a > a_c)) {
    throw DomainError("census drift must exceed the critical drift " + std::to_string(a_c));
  }
  if (growth < 2) throw DomainError("census growth factor must be an integer >= 2");
  if (k_max < 0) throw DomainError("census k_max must be >= 0");
  if (runs < 1) throw DomainError("census needs at least one run");
  if (options.cap < 0) throw DomainError("census cap must be >= 0 (0 = uncapped)");
  if (options.workers < 1) throw DomainError("worker count must be >= 1");

  const double width = b.has_value() ? *b : b_roots(rep.sigma_sq, a).b_a;
  if (!(width > 0.0) || !std::isfinite(width)) {
    throw DomainError("census corridor width must be positive and finite");
  }

  // Checkpoints growth^k; the k = 0 row is the ancestor at generation 0.
  std::vector<long> checkpoints{0};
  long horizon = 1;
  for (int k = 1; k <= k_max; ++k) {
    if (horizon > 10000000 / growth) {
      throw SizeLimit("census horizon growth^k_max exceeds 10^7 generations");
    }
    horizon *= growth;
    checkpoints.push_back(horizon);
  }
  const long last_gen = checkpoints.back();

  const Barrier upper_barrier = PowerLawBarrier{a};
  const double lower_slope = a - width;

  // Counts are integers, so exact integer accumulation keeps the means
  // bit-identical across worker counts.
  const int workers = static_cast<int>(std::min<long>(options.workers, runs));
  std::vector<std::vector<unsigned long long>> partial(
      static_cast<size_t>(workers),
      std::vector<unsigned long long>(checkpoints.size(), 0ull));

  run_sharded(workers, [&](int w) {
    auto& sums = partial[static_cast<size_t>(w)];
    std::vector<Node> cur;
    std::vector<Node> next;
    for (long r = w; r < runs; r += workers) {
      const RngStream run_stream = stream.derive(static_cast<std::uint64_t>(r));
      cur.assign(1, Node{0.0, 1});
      sums[0] += 1;
      size_t ck = 1;
      for (long g = 0; g < last_gen && !cur.empty(); ++g) {
        const double upper = barrier_value(upper_barrier, g + 1);
        const double lower = lower_slope * std::cbrt(static_cast<double>(g + 1));
        advance(law, run_stream, cur, upper, &lower, next);
        cur.swap(next);
        if (options.cap > 0 && static_cast<long>(cur.size()) > options.cap) {
          subsample(cur, options.cap,
                    run_stream.derive(mix64(kShuffleTag, static_cast<std::uint64_t>(g + 1))));
        }
        if (ck < checkpoints.size() && checkpoints[ck] == g + 1) {
          sums[ck] += cur.size();
          ++ck;
        }
      }
    }
  });

  std::vector<CensusRecord> records(checkpoints.size());
  for (size_t k = 0; k < checkpoints.size(); ++k) {
    unsigned long long total = 0;
    for (const auto& sums : partial) total += sums[k];
    CensusRecord& rec = records[k];
    rec.k = static_cast<int>(k);
    rec.checkpoint = checkpoints[k];
    rec.mean_count = static_cast<double>(total) / static_cast<double>(runs);
    rec.target = std::exp(std::cbrt(static_cast<double>(checkpoints[k])) *
                          (width - options.eps));
    rec.meets_target = rec.mean_count >= rec.target;
  }
  return records;
}

BarrierClassification classify_general_barrier(double sigma_sq, const Barrier& barrier,
                                               long sparse_stride_min) {
  if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq)) {
    throw DomainError("classification needs sigma_sq > 0");
  }
  validate_barrier(barrier);

  const std::optional<double> up = barrier_a_plus(barrier);
  const std::optional<double> lo = barrier_a_minus(barrier);
  if (!up.has_value() || !lo.has_value()) {
    return {BarrierVerdict::Unknown,
            "the barrier has finite range, so no asymptotic cube-root slope exists"};
  }
  const double a_plus = *up;
  const double a_minus = *lo;
  const double a_c = a_critical(sigma_sq);

  std::ostringstream why;
  why.precision(10);

  if (a_plus < a_c) {
    why << "limsup slope " << a_plus << " sits below the critical drift " << a_c
        << "; the barrier is eventually dominated by a dying cube-root barrier";
    return {BarrierVerdict::Extinct, why.str()};
  }
  if (a_minus > a_c) {
    why << "liminf slope " << a_minus << " sits above the critical drift " << a_c
        << "; the barrier eventually dominates a surviving cube-root barrier";
    return {BarrierVerdict::Survives, why.str()};
  }
  if (std::holds_alternative<OscillatingParityBarrier>(barrier) && a_minus < a_c) {
    why << "the slope alternates by parity and its low value " << a_minus
        << " falls below the critical drift " << a_c
        << "; the low-parity kills bite on half of all generations";
    return {BarrierVerdict::Extinct, why.str()};
  }

  // From here a_plus is finite with a_plus >= a_c, so the upper corridor
  // root exists and the dip threshold 3 pi^2 sigma_sq / (2 b^2) is defined.
  const double b_up = b_roots(sigma_sq, a_plus).b_a;
  const double threshold = 3.0 * kPi * kPi * sigma_sq / (2.0 * b_up * b_up);

  if (a_minus < threshold) {
    why << "liminf slope " << a_minus << " falls below the corridor threshold " << threshold
        << " attached to the limsup slope " << a_plus
        << "; the dips cut every surviving corridor";
    return {BarrierVerdict::Extinct, why.str()};
  }
  if (const auto* dip = std::get_if<SparseDipBarrier>(&barrier)) {
    if (dip->stride < sparse_stride_min) {
      why << "dip stride " << dip->stride << " is below the configured minimum "
          << sparse_stride_min << "; the sparse-dip survival argument is asymptotic "
          << "in the stride, so no verdict";
      return {BarrierVerdict::Unknown, why.str()};
    }
    if (a_minus > threshold) {
      why << "dips recur only at powers of the stride " << dip->stride
          << " and the dip slope " << a_minus << " stays above the corridor threshold "
          << threshold << "; the corridor population regrows past each dip "
          << "(asymptotic in the stride)";
      return {BarrierVerdict::Survives, why.str()};
    }
  }
  why << "slopes [" << a_minus << ", " << a_plus << "] straddle the critical drift " << a_c
      << " with no deciding rule; exactly-critical behaviour is open";
  return {BarrierVerdict::Unknown, why.str()};
}

SlopeFit extinction_slope_fit(const std::vector<SurvivalEstimate>& estimates) {
  struct Row {
    double x;
    double y;
    double w;
  };
  std::vector<Row> rows;
  bool weighted = true;
  for (const auto& e : estimates) {
    if (!(e.p_hat > 0.0) || !std::isfinite(e.p_hat)) continue;
    if (e.n < 1) throw DomainError("slope fit estimates need n >= 1");
    Row row;
    row.x = std::cbrt(static_cast<double>(e.n));
    row.y = -std::log(e.p_hat);
    if (e.std_error > 0.0 && std::isfinite(e.std_error)) {
      const double rel = e.std_error / e.p_hat;
      row.w = 1.0 / (rel * rel);
    } else {
      row.w = 1.0;
      weighted = false;
    }
    rows.push_back(row);
  }
  if (rows.size() < 3) {
    throw DomainError("slope fit needs at least three estimates with p_hat > 0");
  }
  if (!weighted) {
    for (auto& row : rows) row.w = 1.0;
  }

  long double wsum = 0.0L, xsum = 0.0L, ysum = 0.0L;
  for (const auto& row : rows) {
    wsum += row.w;
    xsum += static_cast<long double>(row.w) * row.x;
    ysum += static_cast<long double>(row.w) * row.y;
  }
  const long double xbar = xsum / wsum;
  const long double ybar = ysum / wsum;
  long double sxx = 0.0L, sxy = 0.0L, syy = 0.0L;
  for (const auto& row : rows) {
    const long double dx = row.x - xbar;
    const long double dy = row.y - ybar;
    sxx += row.w * dx * dx;
    sxy += row.w * dx * dy;
    syy += row.w * dy * dy;
  }
  if (!(sxx > 0.0L)) {
    throw DegenerateFit("all slope-fit estimates share one horizon n");
  }

  SlopeFit fit;
  fit.c_hat = static_cast<double>(sxy / sxx);
  long double ssr = syy - (sxy * sxy) / sxx;
  if (ssr < 0.0L) ssr = 0.0L;
  fit.r_squared = syy > 0.0L ? static_cast<double>(1.0L - ssr / syy) : 1.0;
  if (weighted) {
    // Weights are inverse variances of y, so the slope variance is 1/sxx.
    fit.std_error = static_cast<double>(std::sqrt(1.0L / sxx));
  } else {
    const size_t m = rows.size();
    fit.std_error = m > 2 ? static_cast<double>(std::sqrt(
                                ssr / static_cast<long double>(m - 2) / sxx))
                          : 0.0;
  }
  return fit;
}

}  // namespace brw
