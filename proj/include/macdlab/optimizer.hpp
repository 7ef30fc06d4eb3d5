#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "macdlab/backtest.hpp"
#include "macdlab/detail/parallel.hpp"
#include "macdlab/error.hpp"
#include "macdlab/indicators.hpp"
#include "macdlab/metrics.hpp"
#include "macdlab/signals.hpp"

namespace macdlab {

/// (fast, slow, signal) periods evolved by the GA.
struct Chromosome {
  int fast = 12;
  int slow = 26;
  int signal = 9;

  int gene(int i) const { return i == 0 ? fast : i == 1 ? slow : signal; }
  int& gene(int i) { return i == 0 ? fast : i == 1 ? slow : signal; }
  MacdParams params() const { return {fast, slow, signal}; }

  friend auto operator<=>(const Chromosome&, const Chromosome&) = default;
};

struct GeneRange {
  int lo = 0;
  int hi = 0;
  bool contains(int v) const { return lo <= v && v <= hi; }
  friend bool operator==(const GeneRange&, const GeneRange&) = default;
};

struct GaConfig {
  int population_size = 30;
  int max_iterations = 100;
  GeneRange fast_range{4, 20};
  GeneRange slow_range{6, 21};
  GeneRange signal_range{4, 41};
  double mutation_prob = 0.1;
  int elitism = 1;
  int convergence_patience = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;  // fitness evaluations only; results do not depend on it

  const GeneRange& range(int gene) const { return gene == 0 ? fast_range : gene == 1 ? slow_range : signal_range; }

  /// Slow range widened to [6, 41], wide enough to reach slow periods in
  /// the high 20s and 30s.
  static GaConfig widened() {
    GaConfig c;
    c.slow_range = {6, 41};
    return c;
  }

  void check() const {
    auto fail = [](const std::string& why) { throw Error(Errc::InvalidArgument, why); };
    if (population_size < 2) fail("population_size must be >= 2");
    if (max_iterations < 1) fail("max_iterations must be >= 1");
    for (int g = 0; g < 3; ++g)
      if (range(g).lo > range(g).hi || range(g).lo < 1) fail("gene ranges must be non-empty and positive");
    if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) fail("mutation_prob must lie in [0, 1]");
    if (elitism < 0 || elitism > population_size) fail("elitism must lie in [0, population_size]");
    if (convergence_patience < 1) fail("convergence_patience must be >= 1");
    if (!(fast_range.lo < slow_range.hi))
      throw Error(Errc::InfeasibleRanges, "no fast period lies below any slow period");
  }
};

/// Score of one chromosome; nullopt culls it (never selected, never elite).
using FitnessFn = std::function<std::optional<double>(const Chromosome&)>;
using GaRng = std::mt19937_64;

struct GaGeneration {
  int generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;  // over evaluable chromosomes
  Chromosome best;
  friend bool operator==(const GaGeneration&, const GaGeneration&) = default;
};

struct GaTrace {
  std::vector<GaGeneration> generations;
  friend bool operator==(const GaTrace&, const GaTrace&) = default;
};

struct GaResult {
  Chromosome best;
  double best_fitness = 0.0;
  GaTrace trace;
  std::size_t evaluations = 0;  // distinct chromosomes scored
};

// ---------------------------------------------------------------------------
// Operators

/// Selection weights. Positive fitnesses are used as-is; if any evaluable
/// fitness is <= 0 all are shifted by -min + eps. Culled entries weigh 0.
/// If nothing is evaluable the wheel is uniform.
inline std::vector<double> roulette_weights(std::span<const std::optional<double>> fitness) {
  std::vector<double> w(fitness.size(), 0.0);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& f : fitness)
    if (f) {
      lo = std::min(lo, *f);
      hi = std::max(hi, *f);
    }
  if (!(lo <= hi)) {
    std::fill(w.begin(), w.end(), 1.0);
    return w;
  }
  const double shift = lo > 0.0 ? 0.0 : -lo + 1e-9 * std::max(1.0, hi - lo);
  for (std::size_t i = 0; i < fitness.size(); ++i)
    if (fitness[i]) w[i] = *fitness[i] + shift;
  return w;
}

/// Two independent fitness-proportional draws; returns indices.
inline std::pair<std::size_t, std::size_t> roulette_select(std::span<const std::optional<double>> fitness, GaRng& rng) {
  if (fitness.size() < 2) throw Error(Errc::InvalidArgument, "selection needs at least 2 chromosomes");
  const auto w = roulette_weights(fitness);
  std::discrete_distribution<std::size_t> wheel(w.begin(), w.end());
  const auto a = wheel(rng);
  const auto b = wheel(rng);
  return {a, b};
}

inline std::pair<Chromosome, Chromosome> roulette_select(std::span<const Chromosome> population,
                                                         std::span<const std::optional<double>> fitness, GaRng& rng) {
  detail::require_aligned(population.size(), fitness.size());
  auto [a, b] = roulette_select(fitness, rng);
  return {population[a], population[b]};
}

/// Genes [0, cut) from `a`, [cut, 3) from `b`.
inline Chromosome crossover_at(const Chromosome& a, const Chromosome& b, int cut) {
  if (cut < 1 || cut > 2) throw Error(Errc::InvalidArgument, "cut must be 1 or 2");
  Chromosome c = b;
  for (int g = 0; g < cut; ++g) c.gene(g) = a.gene(g);
  return c;
}

inline Chromosome crossover(const Chromosome& a, const Chromosome& b, GaRng& rng) {
  return crossover_at(a, b, std::uniform_int_distribution<int>(1, 2)(rng));
}

/// With probability mutation_prob, redraws one uniformly chosen gene
/// uniformly from its range.
inline Chromosome mutate(Chromosome c, const GaConfig& cfg, GaRng& rng) {
  if (std::bernoulli_distribution(cfg.mutation_prob)(rng)) {
    const int g = std::uniform_int_distribution<int>(0, 2)(rng);
    const auto& r = cfg.range(g);
    c.gene(g) = std::uniform_int_distribution<int>(r.lo, r.hi)(rng);
  }
  return c;
}

/// Restores fast < slow: redraw slow above fast, or failing that fast below
/// slow. Valid chromosomes pass through untouched and consume no randomness.
inline Chromosome repair(Chromosome c, const GaConfig& cfg, GaRng& rng) {
  for (int g = 0; g < 3; ++g)
    if (!cfg.range(g).contains(c.gene(g)))
      throw Error(Errc::InvalidArgument, "gene " + std::to_string(g) + " outside its range");
  if (c.fast < c.slow) return c;
  const int slow_lo = std::max(c.fast + 1, cfg.slow_range.lo);
  if (slow_lo <= cfg.slow_range.hi) {
    c.slow = std::uniform_int_distribution<int>(slow_lo, cfg.slow_range.hi)(rng);
    return c;
  }
  const int fast_hi = std::min(c.slow - 1, cfg.fast_range.hi);
  if (cfg.fast_range.lo <= fast_hi) {
    c.fast = std::uniform_int_distribution<int>(cfg.fast_range.lo, fast_hi)(rng);
    return c;
  }
  throw Error(Errc::InfeasibleRanges, "cannot place fast below slow within the configured ranges");
}

inline Chromosome random_chromosome(const GaConfig& cfg, GaRng& rng) {
  Chromosome c;
  for (int g = 0; g < 3; ++g) c.gene(g) = std::uniform_int_distribution<int>(cfg.range(g).lo, cfg.range(g).hi)(rng);
  return repair(c, cfg, rng);
}

// ---------------------------------------------------------------------------
// Search

/// Generational GA: evaluate, keep `elitism` best unchanged, refill by
/// select -> crossover -> mutate -> repair. Stops after max_iterations or
/// once the best fitness has not changed for convergence_patience
/// generations. Scores are memoized per chromosome; the RNG is consumed
/// only by the sequential operators, so the result depends on the seed
/// alone.
inline GaResult evolve(const FitnessFn& fitness, const GaConfig& cfg) {
  cfg.check();
  GaRng rng(cfg.seed);
  const auto pop_size = static_cast<std::size_t>(cfg.population_size);

  std::vector<Chromosome> population;
  population.reserve(pop_size);
  for (std::size_t i = 0; i < pop_size; ++i) population.push_back(random_chromosome(cfg, rng));

  std::map<Chromosome, std::optional<double>> cache;
  GaResult result;
  bool have_best = false;
  int stale = 0;

  for (int gen = 0; gen < cfg.max_iterations; ++gen) {
    std::vector<Chromosome> fresh;
    for (const auto& c : population)
      if (!cache.contains(c) && std::find(fresh.begin(), fresh.end(), c) == fresh.end()) fresh.push_back(c);
    std::vector<std::optional<double>> scores(fresh.size());
    detail::parallel_for(fresh.size(), cfg.threads, [&](std::size_t i) { scores[i] = fitness(fresh[i]); });
    for (std::size_t i = 0; i < fresh.size(); ++i) cache.emplace(fresh[i], scores[i]);
    result.evaluations += fresh.size();

    std::vector<std::optional<double>> fit(pop_size);
    for (std::size_t i = 0; i < pop_size; ++i) fit[i] = cache.at(population[i]);

    std::optional<std::size_t> best_idx;
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < pop_size; ++i) {
      if (!fit[i]) continue;
      sum += *fit[i];
      ++counted;
      if (!best_idx || *fit[i] > *fit[*best_idx]) best_idx = i;
    }
    if (!best_idx)
      throw Error(Errc::InvalidArgument, "no chromosome in generation " + std::to_string(gen) + " could be evaluated");

    GaGeneration g{gen, *fit[*best_idx], sum / static_cast<double>(counted), population[*best_idx]};
    const bool improved = !have_best || g.best_fitness > result.best_fitness;
    const bool unchanged = !result.trace.generations.empty() &&
                           g.best_fitness == result.trace.generations.back().best_fitness;
    if (improved) {
      result.best = g.best;
      result.best_fitness = g.best_fitness;
      have_best = true;
    }
    result.trace.generations.push_back(g);
    stale = unchanged ? stale + 1 : 0;
    if (stale >= cfg.convergence_patience || gen + 1 == cfg.max_iterations) break;

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < pop_size; ++i)
      if (fit[i]) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return *fit[a] > *fit[b]; });

    std::vector<Chromosome> next;
    next.reserve(pop_size);
    for (std::size_t i = 0; i < order.size() && next.size() < static_cast<std::size_t>(cfg.elitism); ++i)
      next.push_back(population[order[i]]);
    while (next.size() < pop_size) {
      auto [a, b] = roulette_select(fit, rng);
      auto child = crossover(population[a], population[b], rng);
      child = mutate(child, cfg, rng);
      next.push_back(repair(child, cfg, rng));
    }
    population = std::move(next);
  }
  return result;
}

struct ExhaustiveResult {
  Chromosome best;
  double best_fitness = -std::numeric_limits<double>::infinity();
  std::size_t evaluated = 0;
  bool found = false;
};

/// Scores every valid chromosome in the ranges; ties keep the
/// lexicographically smallest.
inline ExhaustiveResult exhaustive_search(const FitnessFn& fitness, const GaConfig& cfg) {
  cfg.check();
  ExhaustiveResult res;
  for (int f = cfg.fast_range.lo; f <= cfg.fast_range.hi; ++f)
    for (int s = std::max(cfg.slow_range.lo, f + 1); s <= cfg.slow_range.hi; ++s)
      for (int g = cfg.signal_range.lo; g <= cfg.signal_range.hi; ++g) {
        const Chromosome c{f, s, g};
        const auto score = fitness(c);
        ++res.evaluated;
        if (score && (!res.found || *score > res.best_fitness)) {
          res.best = c;
          res.best_fitness = *score;
          res.found = true;
        }
      }
  return res;
}

// ---------------------------------------------------------------------------
// Backtest-driven fitness

/// Accumulated profit times win rate of one backtest; 0 with no trades.
inline double profit_times_win_rate(std::span<const Trade> trades) {
  if (trades.empty()) return 0.0;
  return accumulated_profit(trades).ap * *win_rate(trades);
}

/// Fitness that backtests `base` with the chromosome's MACD periods on each
/// series and sums the per-series scores. Any backtest error culls the
/// chromosome.
inline FitnessFn make_backtest_fitness(std::vector<ValidatedBarSeries> series, StrategySpec base,
                                       ExecutionConfig exec) {
  return [series = std::move(series), base = std::move(base), exec](const Chromosome& c) -> std::optional<double> {
    StrategySpec spec = base;
    spec.params.macd = c.params();
    double total = 0.0;
    try {
      for (const auto& s : series) total += profit_times_win_rate(run_backtest(s, generate_signals(s, spec), exec).trades);
    } catch (const Error&) {
      return std::nullopt;
    }
    return total;
  };
}

}  // namespace macdlab
