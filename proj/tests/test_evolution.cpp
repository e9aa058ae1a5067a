#include <doctest.h>

#include <set>

#include "breakwater/evolution.hpp"

using namespace breakwater;

namespace {

EAConfig small_config(Approach a, uint64_t seed) {
  EAConfig cfg;
  cfg.approach = a;
  cfg.seed = seed;
  cfg.init_size = 60;
  cfg.pop_size = 16;
  cfg.arch_size = 8;
  cfg.real_eval_budget = 140;
  cfg.prep_equiv = 10;
  cfg.surrogate_train.epochs = 8;
  cfg.surrogate_train.min_records = 10;
  cfg.assistant_train.epochs = 5;
  return cfg;
}

bool system_subset(const BreakwaterSystem& sub, const BreakwaterSystem& sup) {
  for (const auto& line : sub.breakwaters) {
    bool found = false;
    for (const auto& other : sup.breakwaters)
      if (line == other) found = true;
    if (!found) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("init_population: feasible, deterministic, bounded") {
  const auto dom = synthetic_case(32);
  const auto pop = init_population(dom, 10, 123);
  REQUIRE(pop.size() == 10);
  for (const auto& sys : pop) {
    CHECK(check_constraints(sys, dom).feasible);
    CHECK(valid_system(sys));
    CHECK(sys.breakwaters.size() >= 1);
    CHECK(sys.breakwaters.size() <= 3);
    for (const auto& line : sys.breakwaters) {
      CHECK(line.size() >= 2);
      CHECK(line.size() <= 5);
    }
  }
  const auto again = init_population(dom, 10, 123);
  REQUIRE(again == pop);
}

TEST_CASE("init_population: infeasible domain hits the retry cap") {
  auto dom = synthetic_case(16);
  for (auto& c : dom.prohibited_mask.cells) c = 1;
  for (size_t i = 0; i < dom.prohibited_mask.cells.size(); ++i)
    if (dom.land_mask.cells[i]) dom.prohibited_mask.cells[i] = 0;
  // keep targets off prohibited cells so the domain itself still validates
  dom.prohibited_mask.at(dom.targets[0].x, dom.targets[0].y) = 0;
  dom.prohibited_mask.at(dom.targets[1].x, dom.targets[1].y) = 0;
  dom.finalize();
  CHECK_THROWS_WITH_AS(init_population(dom, 1, 7),
                       doctest::Contains("retry cap"), std::runtime_error);
}

TEST_CASE("spea2_fitness hand example") {
  const std::vector<ObjectivePoint> pts{{1, 1}, {2, 2}, {3, 0}};
  const auto fit = spea2_fitness(pts);
  // a dominates b only: S = {1,0,0}; R = {0,1,0}
  CHECK(fit[0] < 1.0);   // nondominated
  CHECK(fit[2] < 1.0);   // nondominated
  CHECK(fit[1] >= 1.0);  // dominated by the strength-1 individual
  // the raw part of b's fitness is exactly R(b) = 1
  CHECK(std::floor(fit[1]) == 1.0);
}

TEST_CASE("spea2_fitness: single individual and duplicates") {
  CHECK(spea2_fitness(std::vector<ObjectivePoint>{{5, 5}})[0] < 1.0);
  const std::vector<ObjectivePoint> dup{{1, 2}, {1, 2}, {0, 3}};
  const auto fit = spea2_fitness(dup);
  CHECK(std::floor(fit[0]) == std::floor(fit[1]));  // equal raw fitness
}

TEST_CASE("environmental_selection basic behaviour") {
  // 5 points, 3 nondominated, size 3 -> exactly the nondominated set
  const std::vector<ObjectivePoint> pts{{1, 5}, {3, 3}, {5, 1}, {4, 4}, {6, 6}};
  const auto fit = spea2_fitness(pts);
  const auto sel = environmental_selection(pts, fit, 3);
  CHECK(sel == std::vector<size_t>{0, 1, 2});

  // size == |union| -> identity
  const auto all = environmental_selection(pts, fit, 5);
  CHECK(all == std::vector<size_t>{0, 1, 2, 3, 4});

  // under capacity: fill with best dominated
  const auto four = environmental_selection(pts, fit, 4);
  REQUIRE(four.size() == 4);
  CHECK(std::set<size_t>(four.begin(), four.end()).count(3) == 1);
}

TEST_CASE("environmental_selection truncation drops one of a tight pair") {
  const std::vector<ObjectivePoint> pts{
      {0.0, 6.0}, {2.0, 4.0}, {2.1, 3.9}, {6.0, 0.0}};
  const auto fit = spea2_fitness(pts);
  REQUIRE(environmental_selection(pts, fit, 4).size() == 4);
  const auto sel = environmental_selection(pts, fit, 3);
  REQUIRE(sel.size() == 3);
  const std::set<size_t> s(sel.begin(), sel.end());
  CHECK(s.count(0) == 1);
  CHECK(s.count(3) == 1);
  CHECK(s.count(1) + s.count(2) == 1);  // one of the tight pair survives
}

TEST_CASE("mutate: identity at rate 0, feasible outputs at rate 1") {
  const auto dom = synthetic_case(32);
  const auto pop = init_population(dom, 5, 9);
  Rng rng(10);
  for (const auto& sys : pop)
    CHECK(mutate(sys, dom, 0.0, rng) == sys);

  int changed = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    const auto& base = pop[iter % pop.size()];
    const auto out = mutate(base, dom, 1.0, rng);
    REQUIRE(check_constraints(out, dom).feasible);
    REQUIRE(valid_system(out));
    REQUIRE(out.breakwaters.size() <= 3);
    if (!(out == base)) changed += 1;
  }
  CHECK(changed > 900);  // identity fallback stays rare on an open domain
}

TEST_CASE("mutate can drop a breakwater from a two-breakwater individual") {
  const auto dom = synthetic_case(32);
  BreakwaterSystem two;
  two.breakwaters = {{{6.0, 16.0}, {10.0, 18.0}}, {{24.0, 6.0}, {28.0, 8.0}}};
  REQUIRE(check_constraints(two, dom).feasible);
  Rng rng(11);
  bool saw_single = false;
  for (int iter = 0; iter < 200 && !saw_single; ++iter) {
    const auto out = mutate(two, dom, 1.0, rng);
    if (out.breakwaters.size() == 1) {
      saw_single = true;
      CHECK(check_constraints(out, dom).feasible);
    }
  }
  CHECK(saw_single);
}

TEST_CASE("crossover: subset semantics and feasibility") {
  const auto dom = synthetic_case(32);
  const auto pop = init_population(dom, 6, 21);
  Rng rng(22);

  // a = b -> child's breakwaters all come from a
  for (const auto& sys : pop) {
    const auto child = crossover(sys, sys, dom, rng);
    CHECK(system_subset(child, sys));
  }

  // single-breakwater parents -> child has 1 or 2 breakwaters
  BreakwaterSystem a{{{{14.0, 14.0}, {18.0, 16.0}}}};
  BreakwaterSystem b{{{{20.0, 22.0}, {24.0, 20.0}}}};
  for (int iter = 0; iter < 50; ++iter) {
    const auto child = crossover(a, b, dom, rng);
    CHECK(child.breakwaters.size() >= 1);
    CHECK(child.breakwaters.size() <= 2);
  }

  for (int iter = 0; iter < 1000; ++iter) {
    const auto& pa = pop[iter % pop.size()];
    const auto& pb = pop[(iter + 1) % pop.size()];
    const auto child = crossover(pa, pb, dom, rng);
    REQUIRE(check_constraints(child, dom).feasible);
    REQUIRE(child.breakwaters.size() >= 1);
    REQUIRE(child.breakwaters.size() <= 3);
  }
}

TEST_CASE("reproduce: exact count, feasible, reproducible") {
  const auto dom = synthetic_case(32);
  const auto parents = init_population(dom, 8, 31);
  EAConfig cfg = small_config(Approach::no_surrogate, 1);
  const auto kids = reproduce(parents, dom, cfg, 777, cfg.pop_size);
  REQUIRE(int(kids.size()) == cfg.pop_size);
  for (const auto& k : kids) REQUIRE(check_constraints(k, dom).feasible);
  const auto again = reproduce(parents, dom, cfg, 777, cfg.pop_size);
  REQUIRE(again == kids);
}

TEST_CASE("config validation") {
  EAConfig cfg = small_config(Approach::proposed, 1);
  cfg.real_eval_budget = cfg.init_size;  // must strictly exceed
  CHECK_THROWS_AS(cfg.validate(), std::runtime_error);
  cfg = small_config(Approach::proposed, 1);
  cfg.arch_size = cfg.pop_size + 1;
  CHECK_THROWS_AS(cfg.validate(), std::runtime_error);
  CHECK_NOTHROW(small_config(Approach::baseline, 1).validate());
}

TEST_CASE("optimize: invariants across approaches on a small domain") {
  const auto dom = synthetic_case(16);
  for (const Approach a : {Approach::proposed, Approach::no_surrogate,
                           Approach::baseline, Approach::random_search}) {
    CAPTURE(approach_name(a));
    const auto result = optimize(dom, small_config(a, 3));
    CHECK(result.real_evals <= 140);
    CHECK(result.real_evals >= 100);  // budget actually consumed
    REQUIRE_FALSE(result.trace.gens.empty());
    for (const auto& g : result.trace.gens)
      REQUIRE(int(g.archive.size()) <= 8);
    REQUIRE_FALSE(result.archive.empty());
    for (const auto& m : result.archive)
      REQUIRE(m.provenance == EvalProvenance::real);
    // accounting identity: every real evaluation is an init/routed record
    // or an archive verification
    CHECK(result.real_evals ==
          result.dataset_records + result.verification_evals);
    // real-eval counts grow monotonically along the trace
    for (size_t i = 1; i < result.trace.gens.size(); ++i)
      REQUIRE(result.trace.gens[i].real_evals >=
              result.trace.gens[i - 1].real_evals);
  }
}

TEST_CASE("optimize: archive members are nondominated among all real "
          "evaluations of the run") {
  const auto dom = synthetic_case(16);
  EAConfig cfg = small_config(Approach::proposed, 5);
  cfg.keep_dataset = true;
  const auto result = optimize(dom, cfg);
  REQUIRE(result.dataset.has_value());
  for (const auto& m : result.archive) {
    for (const auto& rec : result.dataset->records) {
      const ObjectivePoint p{cost(rec.genotype),
                             aggregate_target_heights(rec.target_heights)};
      REQUIRE_FALSE(dominates(p, m.objectives));
    }
    for (const auto& other : result.archive)
      REQUIRE_FALSE(dominates(other.objectives, m.objectives));
  }
}

TEST_CASE("optimize: hypervolume of the archive never decreases") {
  const auto dom = synthetic_case(16);
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto result = optimize(dom, small_config(Approach::proposed, seed));
    RunTrace trace = result.trace;
    const ObjectivePoint ref{result.nadir.cost * 1.05,
                             result.nadir.wh * 1.05};
    fill_trace_hypervolume(trace, ref);
    for (size_t i = 1; i < trace.gens.size(); ++i)
      REQUIRE(trace.gens[i].hv >= trace.gens[i - 1].hv - 1e-12);
  }
}

TEST_CASE("optimize: disabling the surrogate reproduces no_surrogate "
          "trace-for-trace") {
  const auto dom = synthetic_case(16);
  EAConfig with_flag = small_config(Approach::proposed, 9);
  with_flag.disable_surrogate = true;
  EAConfig plain = small_config(Approach::no_surrogate, 9);
  const auto a = optimize(dom, with_flag);
  const auto b = optimize(dom, plain);
  REQUIRE(a.trace.gens.size() == b.trace.gens.size());
  for (size_t i = 0; i < a.trace.gens.size(); ++i) {
    REQUIRE(a.trace.gens[i].real_evals == b.trace.gens[i].real_evals);
    REQUIRE(a.trace.gens[i].surrogate_evals ==
            b.trace.gens[i].surrogate_evals);
    REQUIRE(a.trace.gens[i].archive.size() == b.trace.gens[i].archive.size());
    for (size_t j = 0; j < a.trace.gens[i].archive.size(); ++j) {
      REQUIRE(a.trace.gens[i].archive[j].cost ==
              b.trace.gens[i].archive[j].cost);
      REQUIRE(a.trace.gens[i].archive[j].wh == b.trace.gens[i].archive[j].wh);
    }
  }
}

TEST_CASE("optimize: seeded runs are exactly reproducible") {
  const auto dom = synthetic_case(16);
  const auto a = optimize(dom, small_config(Approach::baseline, 17));
  const auto b = optimize(dom, small_config(Approach::baseline, 17));
  REQUIRE(a.real_evals == b.real_evals);
  REQUIRE(a.archive.size() == b.archive.size());
  for (size_t i = 0; i < a.archive.size(); ++i) {
    REQUIRE(a.archive[i].objectives == b.archive[i].objectives);
    REQUIRE(a.archive[i].genotype == b.archive[i].genotype);
  }
}
