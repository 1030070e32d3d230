#include "sibdep/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "sibdep/moments.hpp"
#include "sibdep/parallel.hpp"

namespace sibdep {

namespace {

constexpr std::uint64_t kCategoricalThreshold = 12;

void require_type(const EnvironmentEnsemble& ens, int i) {
  if (i < 1 || i > ens.order()) {
    throw IndexError("initial group size " + std::to_string(i) + " outside 1.." +
                     std::to_string(ens.order()));
  }
}

void require_replicas(std::size_t replicas) {
  if (replicas < 2) throw ArgumentError("replicas >= 2 required");
}

std::uint64_t particles_of(const std::vector<std::uint64_t>& counts) {
  std::uint64_t total = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) total += (k + 1) * counts[k];
  return total;
}

/// Splits `trials` draws over categories with the given (unnormalized)
/// weights and calls emit(category, count) for every nonzero count.
template <typename Emit>
void multinomial(std::span<const double> weights, std::uint64_t trials, RngStream& rng,
                 Emit&& emit) {
  if (trials == 0) return;
  double total = 0.0;
  std::size_t last = weights.size();
  for (std::size_t a = 0; a < weights.size(); ++a) {
    if (weights[a] > 0.0) {
      total += weights[a];
      last = a;
    }
  }
  if (last == weights.size()) throw DegenerateError("multinomial over zero weights");

  if (trials < kCategoricalThreshold) {
    for (std::uint64_t t = 0; t < trials; ++t) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      std::size_t pick = last;
      for (std::size_t a = 0; a < last; ++a) {
        acc += weights[a];
        if (u < acc && weights[a] > 0.0) {
          pick = a;
          break;
        }
      }
      emit(pick, std::uint64_t{1});
    }
    return;
  }

  std::uint64_t remaining = trials;
  double mass_left = total;
  for (std::size_t a = 0; a < last && remaining > 0; ++a) {
    const double w = weights[a];
    if (!(w > 0.0)) continue;
    const double p = w / mass_left;
    const std::uint64_t x = p >= 1.0 ? remaining : rng.binomial(remaining, p);
    if (x > 0) emit(a, x);
    remaining -= x;
    mass_left = std::max(mass_left - w, 0.0);
  }
  if (remaining > 0) emit(last, remaining);
}

struct StepBuffers {
  std::vector<double> weights;
};

/// One generation of unconditioned reproduction. Adds the groups begotten by
/// `counts` under `env` to `next` and returns the number of children.
std::uint64_t reproduce(const Environment& env, const std::vector<std::uint64_t>& counts,
                        std::vector<std::uint64_t>& next, RngStream& rng,
                        StepBuffers& buf) {
  std::uint64_t children = 0;
  for (int k = 1; k <= env.order(); ++k) {
    const std::uint64_t c = counts[static_cast<std::size_t>(k - 1)];
    if (c == 0) continue;
    const auto& atoms = env.compiled(k);
    buf.weights.resize(atoms.size());
    for (std::size_t a = 0; a < atoms.size(); ++a) buf.weights[a] = atoms[a].weight;
    multinomial(buf.weights, c, rng, [&](std::size_t a, std::uint64_t x) {
      const CompiledAtom& atom = atoms[a];
      for (std::size_t j = 0; j < atom.groups_by_type.size(); ++j)
        next[j] += x * atom.groups_by_type[j];
      children += x * static_cast<std::uint64_t>(atom.particles);
    });
  }
  return children;
}

MacroState initial_state(int order, int i) {
  MacroState s;
  s.counts.assign(static_cast<std::size_t>(order), 0);
  s.counts[static_cast<std::size_t>(i - 1)] = 1;
  return s;
}

/// Backward survival vectors t[m] for m = 0..n over member indices, t[n] = 1.
std::vector<Eigen::VectorXd> survival_vectors(const EnvironmentEnsemble& ens,
                                              std::span<const std::size_t> seq) {
  const std::size_t n = seq.size();
  std::vector<Eigen::VectorXd> t(n + 1);
  t[n] = Eigen::VectorXd::Ones(ens.order());
  for (std::size_t m = n; m-- > 0;) t[m] = survival_step(ens.member(seq[m]), t[m + 1]);
  return t;
}

Eigen::VectorXd survival_from_indices(const EnvironmentEnsemble& ens,
                                      std::span<const std::size_t> seq) {
  Eigen::VectorXd t = Eigen::VectorXd::Ones(ens.order());
  for (std::size_t m = seq.size(); m-- > 0;) t = survival_step(ens.member(seq[m]), t);
  return t;
}

/// log(prod_{k in kids} (1 - t_k))
double log_all_die(std::span<const int> kids, const Eigen::VectorXd& t) {
  double s = 0.0;
  for (int k : kids) s += std::log1p(-t(k - 1));
  return s;
}

std::vector<std::uint64_t> conditioned_path(const EnvironmentEnsemble& ens,
                                            std::span<const std::size_t> seq, int i,
                                            const std::vector<Eigen::VectorXd>& t,
                                            RngStream& rng, std::uint64_t cap) {
  const std::size_t n = seq.size();
  const auto order = static_cast<std::size_t>(ens.order());
  std::vector<std::uint64_t> doomed(order, 0), free(order, 0);
  std::vector<std::uint64_t> next_doomed(order), next_free(order);
  std::vector<double> weights;
  std::vector<double> suffix;
  int spine = i;
  std::vector<std::uint64_t> zeta(n + 1, 0);
  zeta[0] = static_cast<std::uint64_t>(i);

  for (std::size_t m = 0; m < n; ++m) {
    const Environment& env = ens.member(seq[m]);
    const Eigen::VectorXd& tn = t[m + 1];
    std::fill(next_doomed.begin(), next_doomed.end(), 0);
    std::fill(next_free.begin(), next_free.end(), 0);

    // Spine group: atom tilted by the chance that some child survives.
    const auto& spine_atoms = env.compiled(spine);
    weights.resize(spine_atoms.size());
    for (std::size_t a = 0; a < spine_atoms.size(); ++a) {
      const auto& atom = spine_atoms[a];
      weights[a] = atom.nonempty.empty()
                       ? 0.0
                       : atom.weight * at_least_one_survives(atom.nonempty, tn);
    }
    std::size_t chosen = 0;
    multinomial(weights, 1, rng, [&](std::size_t a, std::uint64_t) { chosen = a; });
    const auto& kids = spine_atoms[chosen].nonempty;

    // First surviving child, given that at least one survives.
    suffix.assign(kids.size() + 1, 0.0);
    for (std::size_t r = kids.size(); r-- > 0;)
      suffix[r] = suffix[r + 1] + std::log1p(-tn(kids[r] - 1));
    std::size_t first = kids.size() - 1;
    for (std::size_t r = 0; r + 1 < kids.size(); ++r) {
      const double some_survive = -std::expm1(suffix[r]);
      if (rng.uniform() * some_survive < tn(kids[r] - 1)) {
        first = r;
        break;
      }
    }
    for (std::size_t r = 0; r < kids.size(); ++r) {
      const auto k = static_cast<std::size_t>(kids[r] - 1);
      if (r < first) ++next_doomed[k];
      else if (r > first) ++next_free[k];
    }
    const int next_spine = kids[first];

    // Doomed groups: every child line dies out by generation n.
    for (int k = 1; k <= env.order(); ++k) {
      const std::uint64_t c = doomed[static_cast<std::size_t>(k - 1)];
      if (c == 0) continue;
      const auto& atoms = env.compiled(k);
      weights.resize(atoms.size());
      for (std::size_t a = 0; a < atoms.size(); ++a)
        weights[a] = atoms[a].weight * std::exp(log_all_die(atoms[a].nonempty, tn));
      multinomial(weights, c, rng, [&](std::size_t a, std::uint64_t x) {
        const auto& g = atoms[a].groups_by_type;
        for (std::size_t j = 0; j < g.size(); ++j) next_doomed[j] += x * g[j];
      });
    }

    // Free groups reproduce without constraint.
    StepBuffers buf;
    reproduce(env, free, next_free, rng, buf);

    spine = next_spine;
    doomed.swap(next_doomed);
    free.swap(next_free);
    zeta[m + 1] = static_cast<std::uint64_t>(spine) + particles_of(doomed) + particles_of(free);
    if (zeta[m + 1] > cap) {
      MacroState last;
      last.counts = doomed;
      for (std::size_t k = 0; k < order; ++k) last.counts[k] += free[k];
      ++last.counts[static_cast<std::size_t>(spine - 1)];
      last.generation = m + 1;
      throw TruncationError("conditioned trajectory exceeded " + std::to_string(cap) +
                                " particles at generation " + std::to_string(m + 1),
                            {last});
    }
  }
  return zeta;
}

double effective_sample_size(std::span<const double> w) {
  double s = 0.0, s2 = 0.0;
  for (double x : w) {
    s += x;
    s2 += x * x;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

}  // namespace

std::uint64_t MacroState::particles() const { return particles_of(counts); }

bool MacroState::extinct() const {
  return std::all_of(counts.begin(), counts.end(), [](std::uint64_t c) { return c == 0; });
}

CoupledTrajectory simulate_macro_coupled(const EnvironmentEnsemble& ens, int i,
                                         std::size_t n, RngStream& rng,
                                         std::uint64_t cap) {
  require_type(ens, i);
  CoupledTrajectory out;
  out.macro.reserve(n + 1);
  out.micro.reserve(n + 1);
  out.macro.push_back(initial_state(ens.order(), i));
  out.micro.push_back(static_cast<std::uint64_t>(i));
  StepBuffers buf;
  for (std::size_t m = 0; m < n; ++m) {
    const MacroState& cur = out.macro.back();
    MacroState next;
    next.counts.assign(cur.counts.size(), 0);
    next.generation = m + 1;
    std::uint64_t children = 0;
    if (!cur.extinct()) {
      const Environment& env = sample_environment(ens, rng);
      children = reproduce(env, cur.counts, next.counts, rng, buf);
    }
    out.macro.push_back(std::move(next));
    out.micro.push_back(children);
    if (children > cap) {
      throw TruncationError("population exceeded " + std::to_string(cap) +
                                " particles at generation " + std::to_string(m + 1),
                            out.macro);
    }
  }
  return out;
}

std::vector<MacroState> simulate_micro(const EnvironmentEnsemble& ens, int i,
                                       std::size_t n, RngStream& rng,
                                       std::uint64_t cap) {
  return simulate_macro_coupled(ens, i, n, rng, cap).macro;
}

Eigen::VectorXd quenched_survival_all(std::span<const Environment> env_seq) {
  if (env_seq.empty()) throw ArgumentError("quenched_survival: empty environment sequence");
  const int order = env_seq.front().order();
  Eigen::VectorXd t = Eigen::VectorXd::Ones(order);
  for (std::size_t m = env_seq.size(); m-- > 0;) {
    if (env_seq[m].order() != order) throw ArgumentError("quenched_survival: mixed orders");
    t = survival_step(env_seq[m], t);
  }
  return t;
}

double quenched_survival(std::span<const Environment> env_seq, int i) {
  if (env_seq.empty()) throw ArgumentError("quenched_survival: empty environment sequence");
  env_seq.front().check_group_size(i);
  return quenched_survival_all(env_seq)(i - 1);
}

std::string to_string(SurvivalMethod m) {
  return m == SurvivalMethod::quenched_exact ? "quenched_exact" : "particle_mc";
}

std::string to_string(ConditioningMethod m) {
  return m == ConditioningMethod::conditioned ? "conditioned" : "rejection";
}

SurvivalEstimate estimate_survival(const EnvironmentEnsemble& ens, int i, std::size_t n,
                                   std::size_t replicas, std::uint64_t seed) {
  require_type(ens, i);
  require_replicas(replicas);
  std::vector<double> values(replicas);
  parallel_for(replicas, [&](std::size_t r) {
    RngStream rng(seed, r);
    const auto seq = sample_environment_sequence(ens, n, rng);
    values[r] = survival_from_indices(ens, seq)(i - 1);
  });
  const Estimate e = mean_stderr(values);
  return {n, i, e.value, e.std_error, replicas, SurvivalMethod::quenched_exact};
}

SurvivalEstimate estimate_survival_particle(const EnvironmentEnsemble& ens, int i,
                                            std::size_t n, std::size_t replicas,
                                            std::uint64_t seed, std::uint64_t cap) {
  require_type(ens, i);
  require_replicas(replicas);
  std::vector<double> alive(replicas);
  parallel_for(replicas, [&](std::size_t r) {
    RngStream rng(seed, r);
    alive[r] = simulate_micro(ens, i, n, rng, cap).back().extinct() ? 0.0 : 1.0;
  });
  const Estimate e = mean_stderr(alive);
  return {n, i, e.value, e.std_error, replicas, SurvivalMethod::particle_mc};
}

std::vector<ScanRow> survival_scaling_scan(const EnvironmentEnsemble& ens, int i,
                                           std::span<const std::size_t> horizons,
                                           std::size_t replicas, double alpha,
                                           std::uint64_t seed) {
  require_type(ens, i);
  require_replicas(replicas);
  if (horizons.empty()) throw ArgumentError("scan: no horizons");
  if (!(alpha > 1.0 && alpha <= 2.0)) throw ArgumentError("scan: alpha must lie in (1, 2]");
  const std::size_t longest = *std::max_element(horizons.begin(), horizons.end());
  const std::size_t h = horizons.size();
  std::vector<double> values(replicas * h);
  parallel_for(replicas, [&](std::size_t r) {
    RngStream rng(seed, r);
    const auto seq = sample_environment_sequence(ens, longest, rng);
    for (std::size_t c = 0; c < h; ++c) {
      const std::span<const std::size_t> prefix(seq.data(), horizons[c]);
      values[r * h + c] = survival_from_indices(ens, prefix)(i - 1);
    }
  });
  std::vector<ScanRow> rows;
  std::vector<double> column(replicas);
  for (std::size_t c = 0; c < h; ++c) {
    for (std::size_t r = 0; r < replicas; ++r) column[r] = values[r * h + c];
    const Estimate e = mean_stderr(column);
    const double scale = std::pow(static_cast<double>(horizons[c]), 1.0 / alpha);
    rows.push_back({horizons[c], e.value, e.std_error, scale * e.value});
  }
  return rows;
}

std::vector<std::uint64_t> sample_conditioned_trajectory(
    const EnvironmentEnsemble& ens, std::span<const std::size_t> seq, int i,
    RngStream& rng, std::uint64_t cap) {
  require_type(ens, i);
  for (std::size_t idx : seq)
    if (idx >= ens.size()) throw IndexError("environment index out of range");
  const auto t = survival_vectors(ens, seq);
  if (!(t[0](i - 1) > 0.0)) {
    throw DegenerateError("environment sequence gives zero survival probability");
  }
  return conditioned_path(ens, seq, i, t, rng, cap);
}

ConditionalLaw conditional_size_distribution(const EnvironmentEnsemble& ens, int i,
                                             std::size_t n, std::size_t replicas,
                                             std::uint64_t seed,
                                             ConditioningMethod method,
                                             std::uint64_t cap) {
  require_type(ens, i);
  require_replicas(replicas);
  if (n < 1) throw ArgumentError("horizon n >= 1 required");
  std::vector<double> weight(replicas, 0.0);
  std::vector<std::uint64_t> size(replicas, 0);
  parallel_for(replicas, [&](std::size_t r) {
    RngStream rng(seed, r);
    if (method == ConditioningMethod::conditioned) {
      const auto seq = sample_environment_sequence(ens, n, rng);
      const auto t = survival_vectors(ens, seq);
      const double p = t[0](i - 1);
      if (!(p > 0.0)) return;
      weight[r] = p;
      size[r] = conditioned_path(ens, seq, i, t, rng, cap).back();
    } else {
      const MacroState last = simulate_micro(ens, i, n, rng, cap).back();
      if (last.extinct()) return;
      weight[r] = 1.0;
      size[r] = last.particles();
    }
  });

  ConditionalLaw out;
  out.horizon = n;
  out.initial_type = i;
  out.method = method;
  out.replicas = replicas;
  out.survivors = static_cast<std::size_t>(
      std::count_if(weight.begin(), weight.end(), [](double w) { return w > 0.0; }));
  out.effective_sample_size = effective_sample_size(weight);
  if (method == ConditioningMethod::rejection && out.survivors < 100) {
    throw InsufficientSampleError("only " + std::to_string(out.survivors) +
                                  " of " + std::to_string(replicas) +
                                  " replicas survived; at least 100 needed");
  }
  if (out.effective_sample_size < 100.0) {
    throw InsufficientSampleError("effective sample size " +
                                  std::to_string(out.effective_sample_size) +
                                  " below 100");
  }

  std::uint64_t largest = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < replicas; ++r) {
    if (weight[r] > 0.0) largest = std::max(largest, size[r]);
    total += weight[r];
  }
  out.mass.assign(static_cast<std::size_t>(largest) + 1, 0.0);
  for (std::size_t r = 0; r < replicas; ++r)
    if (weight[r] > 0.0) out.mass[static_cast<std::size_t>(size[r])] += weight[r] / total;

  for (int g = 0; g <= 10; ++g) {
    const double s = g / 10.0;
    double value = 0.0, power = 1.0;
    for (double p : out.mass) {
      value += p * power;
      power *= s;
    }
    out.pgf_grid.push_back(s);
    out.pgf_values.push_back(value);
  }
  return out;
}

PathSummary log_population_path(const EnvironmentEnsemble& ens, int i, std::size_t n,
                                std::size_t replicas, double alpha, std::uint64_t seed,
                                const PathOptions& options) {
  require_type(ens, i);
  require_replicas(replicas);
  if (n < 1) throw ArgumentError("horizon n >= 1 required");
  if (!(alpha > 1.0 && alpha <= 2.0)) throw ArgumentError("paths: alpha must lie in (1, 2]");
  if (options.cap < 2) throw ArgumentError("paths: cap must be at least 2");

  std::vector<Eigen::MatrixXd> macro_means;
  for (const Environment& env : ens.members()) macro_means.push_back(macro_moments(env).mean);
  const double scale = options.normalization(n) *
                       std::pow(static_cast<double>(n), -1.0 / alpha);
  const auto order = static_cast<std::size_t>(ens.order());
  Eigen::VectorXd weights_by_size(ens.order());
  for (int k = 1; k <= ens.order(); ++k) weights_by_size(k - 1) = k;
  const double cap = static_cast<double>(options.cap);
  const double resume = cap / 2.0;

  std::vector<std::optional<PathRecord>> slots(replicas);
  parallel_for(replicas, [&](std::size_t r) {
    RngStream rng(seed, r);
    StepBuffers buf;
    PathRecord rec;
    rec.times.resize(n + 1);
    rec.values.resize(n + 1);
    std::vector<std::uint64_t> counts(order, 0), next(order);
    counts[static_cast<std::size_t>(i - 1)] = 1;
    bool fluid = false;
    Eigen::VectorXd x(ens.order());
    double log_mass = 0.0;
    rec.times[0] = 0.0;
    rec.values[0] = scale * std::log(static_cast<double>(i));
    for (std::size_t m = 0; m < n; ++m) {
      const std::size_t idx = sample_environment_index(ens, rng);
      double log_zeta;
      if (fluid) {
        x = (macro_means[idx].transpose() * x).eval();
        const double s = x.sum();
        if (!(s > 0.0)) throw DegenerateError("mean recursion reached zero");
        x /= s;
        log_mass += std::log(s);
        log_zeta = std::log(x.dot(weights_by_size)) + log_mass;
        if (log_zeta < std::log(resume)) {
          fluid = false;
          for (std::size_t k = 0; k < order; ++k) {
            const double v = x(static_cast<Eigen::Index>(k)) * std::exp(log_mass);
            const double base = std::floor(v);
            counts[k] = static_cast<std::uint64_t>(base) + (rng.uniform() < v - base ? 1 : 0);
          }
          const std::uint64_t z = particles_of(counts);
          log_zeta = z > 0 ? std::log(static_cast<double>(z))
                           : -std::numeric_limits<double>::infinity();
        }
      } else {
        std::fill(next.begin(), next.end(), 0);
        reproduce(ens.member(idx), counts, next, rng, buf);
        counts.swap(next);
        const std::uint64_t z = particles_of(counts);
        if (z == 0) return;
        log_zeta = std::log(static_cast<double>(z));
        if (static_cast<double>(z) > cap) {
          fluid = true;
          rec.used_mean_field = true;
          for (std::size_t k = 0; k < order; ++k)
            x(static_cast<Eigen::Index>(k)) = static_cast<double>(counts[k]);
          const double s = x.sum();
          x /= s;
          log_mass = std::log(s);
        }
      }
      if (!std::isfinite(log_zeta)) return;
      rec.times[m + 1] = static_cast<double>(m + 1) / static_cast<double>(n);
      rec.values[m + 1] = scale * log_zeta;
    }
    slots[r] = std::move(rec);
  });

  PathSummary out;
  out.horizon = n;
  out.alpha = alpha;
  out.replicas = replicas;
  for (auto& slot : slots)
    if (slot) out.records.push_back(std::move(*slot));
  if (out.records.empty()) {
    throw InsufficientSampleError("no replica survived to generation " + std::to_string(n));
  }
  out.mean_path.assign(n + 1, 0.0);
  for (const auto& rec : out.records) {
    out.endpoints.push_back(rec.values.back());
    for (std::size_t m = 0; m <= n; ++m) out.mean_path[m] += rec.values[m];
  }
  for (double& v : out.mean_path) v /= static_cast<double>(out.records.size());
  return out;
}

}  // namespace sibdep
