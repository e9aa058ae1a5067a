#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "breakwater/assistant.hpp"
#include "breakwater/domain.hpp"
#include "breakwater/geometry.hpp"
#include "breakwater/metrics.hpp"
#include "breakwater/rng.hpp"
#include "breakwater/surrogate.hpp"
#include "breakwater/wavesim.hpp"

namespace breakwater {

enum class Approach { proposed, no_surrogate, baseline, random_search };

const char* approach_name(Approach a);
std::optional<Approach> approach_from_name(const std::string& name);

enum class EvalProvenance : uint8_t { real = 0, surrogate = 1 };

struct Individual {
  BreakwaterSystem genotype;
  ObjectivePoint objectives;
  double fitness = 0;
  EvalProvenance provenance = EvalProvenance::real;
  long id = -1;
};

struct GenotypeCaps {
  int max_breakwaters = 3;
  int max_nodes = 5;  // per breakwater
};

struct EAConfig {
  int init_size = 200;
  int pop_size = 40;
  int arch_size = 20;
  double mutation_rate = 0.35;
  int real_eval_budget = 400;
  uint64_t seed = 1;
  Approach approach = Approach::proposed;
  int offspring_cap = 0;  // 0 -> pop_size ((mu,mu) replacement)
  // Real evaluations spent with the plain real-model loop while the
  // surrogate and assistant prepare; scaled from the reference setup where
  // preparation costs about 160 of 2500 evaluations.
  int prep_equiv = 26;
  GenotypeCaps caps;
  double label_err_threshold = 0.05;
  SurrogateTrainOptions surrogate_train;
  AssistantTrainOptions assistant_train;
  bool disable_surrogate = false;  // proposed degenerates to no_surrogate
  bool keep_dataset = false;       // return the accumulated dataset
  WaveParams wave;
  Aggregation wh_agg = Aggregation::sum;

  void validate() const;  // throws std::runtime_error
};

struct GenerationRecord {
  int gen = 0;
  long real_evals = 0;
  long surrogate_evals = 0;
  std::vector<ObjectivePoint> archive;
  double hv = 0;  // filled once a reference point is fixed
};

struct RunTrace {
  std::vector<GenerationRecord> gens;
};

struct RunResult {
  std::vector<Individual> archive;  // provenance == real for every member
  RunTrace trace;
  ObjectivePoint nadir;  // componentwise max over real-evaluated points
  long real_evals = 0;
  long surrogate_evals = 0;
  long verification_evals = 0;
  long dataset_records = 0;
  // surrogate diagnostics (proposed approach only)
  bool surrogate_ready = false;
  double surrogate_test_mape = -1;
  double surrogate_test_mae = -1;
  double assistant_auc = -1;
  double assistant_threshold = -1;
  long routed_real = 0;
  long routed_surrogate = 0;
  std::optional<TrainingDataset> dataset;  // when cfg.keep_dataset
};

// Fills the hv of every generation record against `reference`.
void fill_trace_hypervolume(RunTrace& trace, ObjectivePoint reference);

// ---------------------------------------------------------------------------
// building blocks
// ---------------------------------------------------------------------------

// Rejection-samples `count` feasible genotypes: breakwater count uniform in
// {1..3}, segments per breakwater uniform in {1..4}, nodes uniform over the
// search area. Throws when a single individual exceeds 10^4 rejections.
std::vector<BreakwaterSystem> init_population(const DomainConfig& dom,
                                              int count, uint64_t seed,
                                              const GenotypeCaps& caps = {});

// SPEA2 fitness: strength S(i) = |{j : i dominates j}|, raw fitness
// R(i) = sum of S(j) over dominators j of i, density D = 1/(sigma_k + 2)
// with k = floor(sqrt(N)). Lower is better; nondominated < 1.
std::vector<double> spea2_fitness(std::span<const ObjectivePoint> objectives);

// Keeps every nondominated individual (fitness < 1); over capacity,
// iteratively drops the member with the lexicographically smallest
// nearest-neighbour distance vector; under capacity, fills with the best
// dominated by fitness. Returns selected indices.
std::vector<size_t> environmental_selection(
    std::span<const ObjectivePoint> objectives, std::span<const double> fitness,
    size_t size);

// One of five operators chosen uniformly (node shift, node insert, node
// delete, breakwater add, breakwater delete), retried with fresh randomness
// until the result is feasible (cap 100; identity fallback).
BreakwaterSystem mutate(const BreakwaterSystem& ind, const DomainConfig& dom,
                        double rate, Rng& rng, const GenotypeCaps& caps = {});

// Child = random non-empty subset of a's breakwaters plus a random subset of
// b's, capped at caps.max_breakwaters; retried until feasible (cap 100;
// falls back to a copy of a).
BreakwaterSystem crossover(const BreakwaterSystem& a, const BreakwaterSystem& b,
                           const DomainConfig& dom, Rng& rng,
                           const GenotypeCaps& caps = {});

// (mu,mu) reproduction: samples random ordered parent pairs, applies
// crossover then mutation, until `count` feasible children exist. Each
// child's randomness is split deterministically from gen_seed, so any
// evaluation order yields the same offspring.
std::vector<BreakwaterSystem> reproduce(std::span<const BreakwaterSystem> parents,
                                        const DomainConfig& dom,
                                        const EAConfig& cfg, uint64_t gen_seed,
                                        int count);

// ---------------------------------------------------------------------------
// full pipeline
// ---------------------------------------------------------------------------

using OracleFn = std::function<WaveField(const BreakwaterSystem&)>;

// Three-stage surrogate-assisted optimization (or one of the reference
// approaches). `oracle` overrides the built-in wave model when set.
RunResult optimize(const DomainConfig& dom, const EAConfig& cfg,
                   const OracleFn& oracle = nullptr);

}  // namespace breakwater
