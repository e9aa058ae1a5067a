#include "breakwater/evolution.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace breakwater {

const char* approach_name(Approach a) {
  switch (a) {
    case Approach::proposed: return "proposed";
    case Approach::no_surrogate: return "no_surrogate";
    case Approach::baseline: return "baseline";
    case Approach::random_search: return "random_search";
  }
  return "unknown";
}

std::optional<Approach> approach_from_name(const std::string& name) {
  if (name == "proposed") return Approach::proposed;
  if (name == "no_surrogate") return Approach::no_surrogate;
  if (name == "baseline") return Approach::baseline;
  if (name == "random_search") return Approach::random_search;
  return std::nullopt;
}

void EAConfig::validate() const {
  if (init_size <= 0 || pop_size <= 0 || arch_size <= 0)
    throw std::runtime_error("ea config: sizes must be positive");
  if (!(arch_size <= pop_size && pop_size <= init_size))
    throw std::runtime_error(
        "ea config: requires arch_size <= pop_size <= init_size");
  if (mutation_rate < 0 || mutation_rate > 1)
    throw std::runtime_error("ea config: mutation_rate must lie in [0,1]");
  if (approach == Approach::proposed || approach == Approach::no_surrogate) {
    if (real_eval_budget <= init_size)
      throw std::runtime_error(
          "ea config: budget must exceed init_size for this approach");
  } else if (real_eval_budget <= 0) {
    throw std::runtime_error("ea config: budget must be positive");
  }
  if (prep_equiv < 0)
    throw std::runtime_error("ea config: prep_equiv must be non-negative");
  if (caps.max_breakwaters < 1 || caps.max_nodes < 2)
    throw std::runtime_error("ea config: invalid genotype caps");
}

void fill_trace_hypervolume(RunTrace& trace, ObjectivePoint reference) {
  for (auto& g : trace.gens) g.hv = hypervolume(g.archive, reference);
}

// ---------------------------------------------------------------------------
// sampling
// ---------------------------------------------------------------------------

namespace {

constexpr int kSampleRetryCap = 10000;
constexpr int kOperatorRetryCap = 100;

Polyline random_polyline(Rng& rng, const DomainConfig& dom, int segments) {
  Polyline line;
  for (int i = 0; i <= segments; ++i)
    line.push_back({rng.uniform(0.0, double(dom.width)),
                    rng.uniform(0.0, double(dom.height))});
  return line;
}

BreakwaterSystem random_system(Rng& rng, const DomainConfig& dom,
                               const GenotypeCaps& caps) {
  BreakwaterSystem sys;
  const int n_bw = rng.uniform_int(1, std::min(3, caps.max_breakwaters));
  for (int b = 0; b < n_bw; ++b) {
    const int segs = rng.uniform_int(1, std::min(4, caps.max_nodes - 1));
    sys.breakwaters.push_back(random_polyline(rng, dom, segs));
  }
  return sys;
}

}  // namespace

std::vector<BreakwaterSystem> init_population(const DomainConfig& dom,
                                              int count, uint64_t seed,
                                              const GenotypeCaps& caps) {
  std::vector<BreakwaterSystem> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(Rng::derive(seed, 0x696e6470ULL, uint64_t(i)));
    bool ok = false;
    for (int attempt = 0; attempt < kSampleRetryCap; ++attempt) {
      BreakwaterSystem sys = random_system(rng, dom, caps);
      if (check_constraints(sys, dom).feasible) {
        out.push_back(std::move(sys));
        ok = true;
        break;
      }
    }
    if (!ok)
      throw std::runtime_error(
          "init_population: rejection sampling exceeded retry cap; domain may "
          "leave no room for feasible breakwaters");
  }
  return out;
}

// ---------------------------------------------------------------------------
// SPEA2 fitness and environmental selection
// ---------------------------------------------------------------------------

std::vector<double> spea2_fitness(std::span<const ObjectivePoint> objectives) {
  const size_t n = objectives.size();
  std::vector<double> strength(n, 0.0), raw(n, 0.0), fitness(n, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if (i != j && dominates(objectives[i], objectives[j])) strength[i] += 1;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if (i != j && dominates(objectives[j], objectives[i]))
        raw[i] += strength[j];

  const int k = std::clamp(int(std::floor(std::sqrt(double(n)))), 1,
                           n > 1 ? int(n - 1) : 1);
  std::vector<double> dist;
  for (size_t i = 0; i < n; ++i) {
    double sigma = 0.0;
    if (n > 1) {
      dist.clear();
      for (size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dc = objectives[i].cost - objectives[j].cost;
        const double dw = objectives[i].wh - objectives[j].wh;
        dist.push_back(std::sqrt(dc * dc + dw * dw));
      }
      std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
      sigma = dist[k - 1];
    }
    fitness[i] = raw[i] + 1.0 / (sigma + 2.0);
  }
  return fitness;
}

namespace {

double sq_dist(const ObjectivePoint& a, const ObjectivePoint& b) {
  const double dc = a.cost - b.cost, dw = a.wh - b.wh;
  return dc * dc + dw * dw;
}

}  // namespace

std::vector<size_t> environmental_selection(
    std::span<const ObjectivePoint> objectives, std::span<const double> fitness,
    size_t size) {
  if (size >= objectives.size()) {
    std::vector<size_t> all(objectives.size());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }

  std::vector<size_t> selected, dominated;
  for (size_t i = 0; i < objectives.size(); ++i)
    (fitness[i] < 1.0 ? selected : dominated).push_back(i);

  if (selected.size() < size) {
    std::sort(dominated.begin(), dominated.end(), [&](size_t a, size_t b) {
      if (fitness[a] != fitness[b]) return fitness[a] < fitness[b];
      return a < b;
    });
    for (size_t i = 0; selected.size() < size; ++i)
      selected.push_back(dominated[i]);
    std::sort(selected.begin(), selected.end());
    return selected;
  }

  // SPEA2 truncation: repeatedly drop the member with the lexicographically
  // smallest sorted distance vector to the remaining members.
  while (selected.size() > size) {
    const size_t m = selected.size();
    std::vector<std::vector<double>> dists(m);
    for (size_t i = 0; i < m; ++i) {
      dists[i].reserve(m - 1);
      for (size_t j = 0; j < m; ++j)
        if (j != i)
          dists[i].push_back(sq_dist(objectives[selected[i]],
                                     objectives[selected[j]]));
      std::sort(dists[i].begin(), dists[i].end());
    }
    size_t victim = 0;
    for (size_t i = 1; i < m; ++i) {
      if (std::lexicographical_compare(dists[i].begin(), dists[i].end(),
                                       dists[victim].begin(),
                                       dists[victim].end()))
        victim = i;
    }
    selected.erase(selected.begin() + victim);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

// ---------------------------------------------------------------------------
// genetic operators
// ---------------------------------------------------------------------------

namespace {

enum class MutOp { shift_node, insert_node, delete_node, add_bw, delete_bw };

bool apply_mutation(BreakwaterSystem& sys, const DomainConfig& dom, Rng& rng,
                    const GenotypeCaps& caps) {
  const double diag = std::sqrt(double(dom.width) * dom.width +
                                double(dom.height) * dom.height);
  const MutOp op = MutOp(rng.uniform_int(0, 4));
  switch (op) {
    case MutOp::shift_node: {
      auto& line = sys.breakwaters[rng.uniform_int(0, int(sys.breakwaters.size()) - 1)];
      auto& node = line[rng.uniform_int(0, int(line.size()) - 1)];
      node.x += rng.normal(0.0, 0.05 * diag);
      node.y += rng.normal(0.0, 0.05 * diag);
      return true;
    }
    case MutOp::insert_node: {
      auto& line = sys.breakwaters[rng.uniform_int(0, int(sys.breakwaters.size()) - 1)];
      if (int(line.size()) >= caps.max_nodes) return false;
      const int seg = rng.uniform_int(0, int(line.size()) - 2);
      Point mid{0.5 * (line[seg].x + line[seg + 1].x),
                0.5 * (line[seg].y + line[seg + 1].y)};
      mid.x += rng.normal(0.0, 0.025 * diag);
      mid.y += rng.normal(0.0, 0.025 * diag);
      line.insert(line.begin() + seg + 1, mid);
      return true;
    }
    case MutOp::delete_node: {
      auto& line = sys.breakwaters[rng.uniform_int(0, int(sys.breakwaters.size()) - 1)];
      if (line.size() <= 2) return false;
      line.erase(line.begin() + rng.uniform_int(1, int(line.size()) - 2));
      return true;
    }
    case MutOp::add_bw: {
      if (int(sys.breakwaters.size()) >= caps.max_breakwaters) return false;
      sys.breakwaters.push_back(
          random_polyline(rng, dom, rng.uniform_int(1, 2)));
      return true;
    }
    case MutOp::delete_bw: {
      if (sys.breakwaters.size() <= 1) return false;
      sys.breakwaters.erase(sys.breakwaters.begin() +
                            rng.uniform_int(0, int(sys.breakwaters.size()) - 1));
      return true;
    }
  }
  return false;
}

}  // namespace

BreakwaterSystem mutate(const BreakwaterSystem& ind, const DomainConfig& dom,
                        double rate, Rng& rng, const GenotypeCaps& caps) {
  if (!rng.bernoulli(rate)) return ind;
  for (int attempt = 0; attempt < kOperatorRetryCap; ++attempt) {
    BreakwaterSystem cand = ind;
    if (!apply_mutation(cand, dom, rng, caps)) continue;
    if (valid_system(cand) && check_constraints(cand, dom).feasible)
      return cand;
  }
  return ind;  // no feasible transformation found
}

BreakwaterSystem crossover(const BreakwaterSystem& a, const BreakwaterSystem& b,
                           const DomainConfig& dom, Rng& rng,
                           const GenotypeCaps& caps) {
  for (int attempt = 0; attempt < kOperatorRetryCap; ++attempt) {
    const int na = rng.uniform_int(1, int(a.breakwaters.size()));
    const int nb = rng.uniform_int(0, int(b.breakwaters.size()));
    std::vector<size_t> ia(a.breakwaters.size()), ib(b.breakwaters.size());
    std::iota(ia.begin(), ia.end(), 0);
    std::iota(ib.begin(), ib.end(), 0);
    for (size_t i = ia.size(); i > 1; --i)
      std::swap(ia[i - 1], ia[rng.uniform_int(0, int(i) - 1)]);
    for (size_t i = ib.size(); i > 1; --i)
      std::swap(ib[i - 1], ib[rng.uniform_int(0, int(i) - 1)]);

    BreakwaterSystem child;
    for (int i = 0; i < na && int(child.breakwaters.size()) < caps.max_breakwaters; ++i)
      child.breakwaters.push_back(a.breakwaters[ia[i]]);
    for (int i = 0; i < nb && int(child.breakwaters.size()) < caps.max_breakwaters; ++i)
      child.breakwaters.push_back(b.breakwaters[ib[i]]);
    if (child.breakwaters.empty()) continue;
    if (check_constraints(child, dom).feasible) return child;
  }
  return a;
}

std::vector<BreakwaterSystem> reproduce(std::span<const BreakwaterSystem> parents,
                                        const DomainConfig& dom,
                                        const EAConfig& cfg, uint64_t gen_seed,
                                        int count) {
  if (parents.empty()) throw std::runtime_error("reproduce: empty population");
  std::vector<BreakwaterSystem> offspring;
  offspring.reserve(count);
  for (int child = 0; child < count; ++child) {
    Rng rng(Rng::derive(gen_seed, 0x6368696cULL, uint64_t(child)));
    const auto& pa = parents[rng.uniform_int(0, int(parents.size()) - 1)];
    const auto& pb = parents[rng.uniform_int(0, int(parents.size()) - 1)];
    BreakwaterSystem c = crossover(pa, pb, dom, rng, cfg.caps);
    c = mutate(c, dom, cfg.mutation_rate, rng, cfg.caps);
    offspring.push_back(std::move(c));
  }
  return offspring;
}

// ---------------------------------------------------------------------------
// archive with hypervolume-guarded insertion
// ---------------------------------------------------------------------------

namespace {

// Bounded nondominated archive. Candidates are inserted one at a time; on
// overflow the member with the smallest exclusive hypervolume contribution
// (w.r.t. a reference fixed at construction) is dropped, where the current
// cost- and wh-extremes are protected unless the newcomer itself is the
// least contributor. One-at-a-time insertion with this rule makes the
// archive hypervolume non-decreasing for every reference point at or beyond
// the fixed one, which is what the trace monotonicity relies on.
class ArchiveKeeper {
 public:
  ArchiveKeeper(size_t capacity, ObjectivePoint guard)
      : capacity_(capacity), guard_(guard) {}

  const std::vector<Individual>& members() const { return members_; }

  std::vector<ObjectivePoint> snapshot() const {
    std::vector<ObjectivePoint> pts;
    pts.reserve(members_.size());
    for (const auto& m : members_) pts.push_back(m.objectives);
    return pts;
  }

  void insert(const Individual& cand) {
    if (cand.objectives.cost >= guard_.cost || cand.objectives.wh >= guard_.wh)
      return;  // outside the guarded box: zero contribution by construction
    for (const auto& m : members_) {
      if (dominates(m.objectives, cand.objectives) ||
          m.objectives == cand.objectives)
        return;
    }
    std::erase_if(members_, [&](const Individual& m) {
      return dominates(cand.objectives, m.objectives);
    });
    members_.push_back(cand);
    if (members_.size() <= capacity_) return;

    // exclusive contribution of every member against the guard reference
    std::vector<size_t> order(members_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return members_[a].objectives.cost < members_[b].objectives.cost;
    });
    const size_t n = order.size();
    std::vector<double> contrib(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
      const auto& p = members_[order[i]].objectives;
      const double next_cost =
          (i + 1 < n) ? members_[order[i + 1]].objectives.cost : guard_.cost;
      const double prev_wh =
          (i > 0) ? members_[order[i - 1]].objectives.wh : guard_.wh;
      contrib[order[i]] = (next_cost - p.cost) * (prev_wh - p.wh);
    }
    const size_t cost_extreme = order.front();
    const size_t wh_extreme = order.back();
    const size_t newcomer = members_.size() - 1;

    size_t victim = SIZE_MAX;
    for (size_t i = 0; i < n; ++i) {
      if ((i == cost_extreme || i == wh_extreme) && i != newcomer) continue;
      if (victim == SIZE_MAX || contrib[i] < contrib[victim]) victim = i;
    }
    if (victim == SIZE_MAX) victim = newcomer;
    members_.erase(members_.begin() + victim);
  }

 private:
  size_t capacity_;
  ObjectivePoint guard_;
  std::vector<Individual> members_;
};

struct Evaluator {
  const DomainConfig& dom;
  const EAConfig& cfg;
  OracleFn oracle;
  TrainingDataset* dataset = nullptr;  // records appended for routed/init evals
  long real_evals = 0;
  long surrogate_evals = 0;
  long dataset_records = 0;
  ObjectivePoint nadir{0, 0};
  std::vector<ObjectivePoint> real_points;  // all real-evaluated objectives

  WaveField run_real(const BreakwaterSystem& sys) {
    return oracle ? oracle(sys) : simulate(sys, dom, cfg.wave);
  }

  // Real evaluation; appends to the dataset unless `verification`.
  void eval_real(Individual& ind, uint64_t mask_seed, bool verification) {
    const WaveField field = run_real(ind.genotype);
    const auto heights = wave_height_at_targets(field, dom);
    ind.objectives.cost = cost(ind.genotype);
    ind.objectives.wh = aggregate_target_heights(heights, cfg.wh_agg);
    ind.provenance = EvalProvenance::real;
    real_evals += 1;
    nadir.cost = std::max(nadir.cost, ind.objectives.cost);
    nadir.wh = std::max(nadir.wh, ind.objectives.wh);
    real_points.push_back(ind.objectives);
    if (!verification) {
      dataset_records += 1;
      if (dataset) dataset->add(ind.genotype, mask_seed, field, heights);
    }
  }

  // Drops archive members dominated by any real-evaluated point of the run.
  // Dominated points contribute no hypervolume, so the trace stays intact.
  void finalize_archive(std::vector<Individual>& archive) const {
    std::erase_if(archive, [&](const Individual& m) {
      for (const auto& p : real_points)
        if (dominates(p, m.objectives)) return true;
      return false;
    });
  }

  void eval_surrogate(Individual& ind, const SurrogateModel& model,
                      const InputMask& mask) {
    const auto pred = predict(model, mask, dom);
    ind.objectives.cost = cost(ind.genotype);
    ind.objectives.wh =
        aggregate_target_heights(pred.target_heights, cfg.wh_agg);
    ind.provenance = EvalProvenance::surrogate;
    surrogate_evals += 1;
  }
};

std::vector<ObjectivePoint> objectives_of(const std::vector<Individual>& v) {
  std::vector<ObjectivePoint> pts;
  pts.reserve(v.size());
  for (const auto& ind : v) pts.push_back(ind.objectives);
  return pts;
}

void sort_individuals(std::vector<Individual>& v) {
  std::sort(v.begin(), v.end(), [](const Individual& a, const Individual& b) {
    if (a.objectives.cost != b.objectives.cost)
      return a.objectives.cost < b.objectives.cost;
    if (a.objectives.wh != b.objectives.wh)
      return a.objectives.wh < b.objectives.wh;
    return a.id < b.id;
  });
}

RunResult random_search_run(const DomainConfig& dom, const EAConfig& cfg,
                            const OracleFn& oracle) {
  RunResult result;
  Evaluator ev{dom, cfg, oracle};

  long next_id = 0;
  std::vector<Individual> block;
  std::unique_ptr<ArchiveKeeper> keeper;
  int gen = 0;
  while (ev.real_evals < cfg.real_eval_budget) {
    block.clear();
    const int want = std::min<long>(cfg.pop_size,
                                    cfg.real_eval_budget - ev.real_evals);
    for (int i = 0; i < want; ++i) {
      Individual ind;
      ind.id = next_id++;
      ind.genotype = init_population(
          dom, 1, Rng::derive(cfg.seed, 0x726e6473ULL, uint64_t(ind.id)),
          cfg.caps)[0];
      ev.eval_real(ind, Rng::derive(cfg.seed, 0x6d736b00ULL, uint64_t(ind.id)),
                   false);
      block.push_back(std::move(ind));
    }
    if (!keeper) {
      const ObjectivePoint guard{ev.nadir.cost * 1.05, ev.nadir.wh * 1.05};
      keeper = std::make_unique<ArchiveKeeper>(size_t(cfg.arch_size), guard);
    }
    sort_individuals(block);
    for (const auto& ind : block) keeper->insert(ind);

    GenerationRecord rec;
    rec.gen = gen++;
    rec.real_evals = ev.real_evals;
    rec.surrogate_evals = 0;
    rec.archive = keeper->snapshot();
    result.trace.gens.push_back(std::move(rec));
  }
  result.archive = keeper ? keeper->members() : std::vector<Individual>{};
  ev.finalize_archive(result.archive);
  sort_individuals(result.archive);
  result.nadir = ev.nadir;
  result.real_evals = ev.real_evals;
  result.dataset_records = ev.dataset_records;
  return result;
}

}  // namespace

RunResult optimize(const DomainConfig& dom, const EAConfig& cfg,
                   const OracleFn& oracle) {
  cfg.validate();
  if (cfg.approach == Approach::random_search)
    return random_search_run(dom, cfg, oracle);

  RunResult result;
  const bool wants_surrogate =
      cfg.approach == Approach::proposed && !cfg.disable_surrogate;
  const int init_size =
      cfg.approach == Approach::baseline ? cfg.pop_size : cfg.init_size;
  const int offspring_cap =
      cfg.offspring_cap > 0 ? cfg.offspring_cap : cfg.pop_size;

  TrainingDataset dataset;
  dataset.width = dom.width;
  dataset.height = dom.height;
  dataset.n_targets = int(dom.targets.size());
  if (cfg.keep_dataset) dataset.domain_text = domain_to_text(dom);

  Evaluator ev{dom, cfg, oracle};
  ev.dataset = (wants_surrogate || cfg.keep_dataset) ? &dataset : nullptr;

  long next_id = 0;
  auto mask_seed_for = [&](long id) {
    return Rng::derive(cfg.seed, 0x6d736b00ULL, uint64_t(id));
  };

  // ---- stage 1: large random initialization, all real evaluations --------
  auto genotypes =
      init_population(dom, init_size, Rng::derive(cfg.seed, 0x696e6974ULL),
                      cfg.caps);
  std::vector<Individual> initial;
  initial.reserve(genotypes.size());
  for (auto& g : genotypes) {
    Individual ind;
    ind.id = next_id++;
    ind.genotype = std::move(g);
    ev.eval_real(ind, mask_seed_for(ind.id), false);
    initial.push_back(std::move(ind));
  }

  const ObjectivePoint guard{ev.nadir.cost * 1.05, ev.nadir.wh * 1.05};
  ArchiveKeeper keeper(size_t(cfg.arch_size), guard);

  {
    const auto objs = objectives_of(initial);
    const auto fit = spea2_fitness(objs);
    for (size_t i = 0; i < initial.size(); ++i) initial[i].fitness = fit[i];
  }

  std::vector<Individual> pop;
  {
    const auto objs = objectives_of(initial);
    std::vector<double> fit(initial.size());
    for (size_t i = 0; i < initial.size(); ++i) fit[i] = initial[i].fitness;
    for (size_t idx :
         environmental_selection(objs, fit, size_t(cfg.pop_size)))
      pop.push_back(initial[idx]);
    // exploration archive: the best of the whole initialization
    std::vector<Individual> seeds;
    for (size_t idx :
         environmental_selection(objs, fit, size_t(cfg.arch_size)))
      seeds.push_back(initial[idx]);
    sort_individuals(seeds);
    for (const auto& s : seeds) keeper.insert(s);
  }

  auto record_generation = [&](int gen) {
    GenerationRecord rec;
    rec.gen = gen;
    rec.real_evals = ev.real_evals;
    rec.surrogate_evals = ev.surrogate_evals;
    rec.archive = keeper.snapshot();
    result.trace.gens.push_back(std::move(rec));
  };
  record_generation(0);

  // ---- stage 2: surrogate preparation -------------------------------------
  SurrogateModel surrogate;
  AssistantModel assistant;
  bool surrogate_active = false;
  bool prep_pending = false;
  const long prep_started_at = ev.real_evals;

  if (wants_surrogate) {
    surrogate = make_surrogate(dom);
    SurrogateTrainOptions sopts = cfg.surrogate_train;
    sopts.seed = Rng::derive(cfg.seed, 0x73757272ULL);
    const auto srep = train_surrogate(surrogate, dataset, dom, sopts);
    result.surrogate_test_mape = srep.test_mape;
    result.surrogate_test_mae = srep.test_mae;
    result.surrogate_ready = surrogate.state == ModelState::ready;

    if (result.surrogate_ready) {
      const auto labels =
          label_dataset(surrogate, dataset, dom, cfg.label_err_threshold);
      size_t n_pos = 0;
      for (const auto& l : labels) n_pos += l.label;
      if (n_pos > 0 && n_pos < labels.size()) {
        assistant = make_assistant(dom);
        AssistantTrainOptions aopts = cfg.assistant_train;
        aopts.seed = Rng::derive(cfg.seed, 0x61737374ULL);
        try {
          const auto arep =
              train_assistant(assistant, dataset, labels, dom, aopts);
          result.assistant_auc = arep.roc_auc;
          std::vector<LabeledRecord> validation;
          for (size_t idx : arep.test_indices) validation.push_back(labels[idx]);
          size_t v_pos = 0;
          for (const auto& l : validation) v_pos += l.label;
          if (v_pos > 0 && v_pos < validation.size()) {
            calibrate_threshold(assistant, dataset, validation, dom);
            result.assistant_threshold = assistant.threshold;
            prep_pending = true;  // becomes active after the prep window
          }
        } catch (const std::runtime_error&) {
          // single-class split: run without the surrogate
        }
      }
    }
  }

  // ---- stage 3: evolutionary loop -----------------------------------------
  int gen = 0;
  while (ev.real_evals < cfg.real_eval_budget) {
    gen += 1;
    if (prep_pending &&
        ev.real_evals - prep_started_at >= cfg.prep_equiv) {
      surrogate_active = true;  // preparation time has been paid for
      prep_pending = false;
    }

    // union of population and archive
    std::vector<Individual> union_pop = pop;
    for (const auto& m : keeper.members()) union_pop.push_back(m);
    const auto objs = objectives_of(union_pop);
    const auto fit = spea2_fitness(objs);
    for (size_t i = 0; i < union_pop.size(); ++i) union_pop[i].fitness = fit[i];

    // candidate archive; surrogate-evaluated candidates must be verified by
    // the real model before entering the archive
    std::vector<Individual> candidates;
    for (size_t idx :
         environmental_selection(objs, fit, size_t(cfg.arch_size)))
      candidates.push_back(union_pop[idx]);
    std::vector<Individual> verified;
    bool budget_out = false;
    for (auto& c : candidates) {
      if (c.provenance == EvalProvenance::surrogate) {
        if (ev.real_evals >= cfg.real_eval_budget) {
          budget_out = true;
          continue;  // unverified candidates cannot enter the archive
        }
        ev.eval_real(c, 0, true);
        result.verification_evals += 1;
        // propagate the verified objectives so the individual is never
        // re-verified while it stays in the working population
        for (auto& p : pop) {
          if (p.id == c.id) {
            p.objectives = c.objectives;
            p.provenance = c.provenance;
          }
        }
      }
      verified.push_back(c);
    }
    sort_individuals(verified);
    for (const auto& v : verified) keeper.insert(v);

    record_generation(gen);
    if (budget_out || ev.real_evals >= cfg.real_eval_budget) break;

    // (mu,mu) reproduction from the union
    std::vector<BreakwaterSystem> parents;
    parents.reserve(union_pop.size());
    for (const auto& u : union_pop) parents.push_back(u.genotype);
    auto children = reproduce(parents, dom, cfg,
                              Rng::derive(cfg.seed, 0x67656e00ULL, uint64_t(gen)),
                              offspring_cap);

    std::vector<Individual> next_pop;
    next_pop.reserve(children.size());
    for (auto& childgeno : children) {
      Individual child;
      child.id = next_id++;
      child.genotype = std::move(childgeno);
      const uint64_t mseed = mask_seed_for(child.id);
      bool use_real = true;
      if (surrogate_active) {
        const InputMask mask = encode(child.genotype, dom, mseed);
        if (route(assistant, mask) == Route::use_surrogate) {
          ev.eval_surrogate(child, surrogate, mask);
          result.routed_surrogate += 1;
          use_real = false;
        } else {
          result.routed_real += 1;
        }
      }
      if (use_real) {
        if (ev.real_evals >= cfg.real_eval_budget) break;  // budget exhausted
        ev.eval_real(child, mseed, false);
      }
      next_pop.push_back(std::move(child));
    }
    if (!next_pop.empty()) pop = std::move(next_pop);
  }

  result.archive = keeper.members();
  ev.finalize_archive(result.archive);
  sort_individuals(result.archive);
  result.nadir = ev.nadir;
  result.real_evals = ev.real_evals;
  result.surrogate_evals = ev.surrogate_evals;
  result.dataset_records = ev.dataset_records;
  if (cfg.keep_dataset) result.dataset = std::move(dataset);
  return result;
}

}  // namespace breakwater
