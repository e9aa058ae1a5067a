// Acceptance suite: runs every agreed criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code = number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <vector>

#include "breakwater/assistant.hpp"
#include "breakwater/csv.hpp"
#include "breakwater/evolution.hpp"
#include "breakwater/experiment.hpp"
#include "breakwater/nn.hpp"
#include "breakwater/rng.hpp"
#include "breakwater/surrogate.hpp"

using namespace breakwater;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& what,
            const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL",
              criterion, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) failures += 1;
}

double median(std::vector<double> v) {
  return nearest_rank_quantile(std::move(v), 0.5);
}

// ---------------------------------------------------------------------------
// criterion 4: gradient correctness, every layer type, rel 1e-3, < 10 s
// ---------------------------------------------------------------------------

bool gradcheck_network(nn::Network<double>& net, uint64_t seed,
                       double tol, std::string& why) {
  Rng rng(seed);
  nn::Tensor4<double> input(1, net.spec.in_channels, net.spec.in_h,
                            net.spec.in_w);
  for (auto& v : input.v) v = rng.uniform(-1, 1);
  typename nn::Network<double>::Tape tape;
  const auto& out = net.forward(input, tape);
  std::vector<double> coeff(out.v.size());
  for (auto& c : coeff) c = rng.uniform(-1, 1);
  nn::Tensor4<double> dlast(out.n, out.c, out.h, out.w);
  for (size_t i = 0; i < coeff.size(); ++i) dlast.v[i] = coeff[i];
  const auto grads = net.backward(tape, dlast);

  auto loss = [&]() {
    const auto o = net.forward(input);
    double l = 0;
    for (size_t i = 0; i < o.v.size(); ++i) l += coeff[i] * double(o.v[i]);
    return l;
  };
  const double h = 1e-5;
  for (size_t li = 0; li < net.weights.size(); ++li) {
    auto check = [&](double& p, double analytic) {
      const double saved = p;
      p = saved + h;
      const double up = loss();
      p = saved - h;
      const double down = loss();
      p = saved;
      const double numeric = (up - down) / (2 * h);
      const double denom =
          std::max(1e-8, std::abs(numeric) + std::abs(analytic));
      if (std::abs(numeric - analytic) / denom > tol) {
        std::ostringstream ss;
        ss << "layer " << li << " rel err "
           << std::abs(numeric - analytic) / denom;
        why = ss.str();
        return false;
      }
      return true;
    };
    for (size_t i = 0; i < net.weights[li].v.size(); ++i)
      if (!check(net.weights[li].v[i], grads.w[li].v[i])) return false;
    for (size_t i = 0; i < net.biases[li].size(); ++i)
      if (!check(net.biases[li][i], grads.b[li][i])) return false;
  }
  return true;
}

void criterion_4_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string why;
  using L = nn::LayerSpec;
  for (nn::Act act : {nn::Act::none, nn::Act::relu}) {
    nn::NetworkSpec enc;
    enc.in_channels = 2;
    enc.in_h = 8;
    enc.in_w = 8;
    enc.layers = {L::conv3(2, 3, act), L::maxpool(),   L::conv3(3, 4, act),
                  L::upsample(),       L::skip(0),     L::conv1(7, 2, act)};
    nn::Network<double> net(enc);
    net.init_params(301 + int(act));
    ok = ok && gradcheck_network(net, 901 + int(act), 1e-3, why);

    nn::NetworkSpec cls;
    cls.in_channels = 2;
    cls.in_h = 8;
    cls.in_w = 8;
    cls.layers = {L::conv3(2, 3, act), L::maxpool(), L::gap(),
                  L::fc(3, 2, act)};
    nn::Network<double> cnet(cls);
    cnet.init_params(401 + int(act));
    ok = ok && gradcheck_network(cnet, 1001 + int(act), 1e-3, why);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  ok = ok && secs < 10.0;
  std::ostringstream d;
  d << "all layer kinds, central differences rel 1e-3, " << secs << " s";
  if (!why.empty()) d << ", " << why;
  report(4, ok, "gradient correctness", d.str());
}

// ---------------------------------------------------------------------------
// criterion 5: hypervolume exactness
// ---------------------------------------------------------------------------

double mc_hypervolume(const std::vector<ObjectivePoint>& pts,
                      ObjectivePoint ref, int samples, uint64_t seed) {
  double min_c = ref.cost, min_w = ref.wh;
  for (const auto& p : pts) {
    min_c = std::min(min_c, p.cost);
    min_w = std::min(min_w, p.wh);
  }
  const double area = (ref.cost - min_c) * (ref.wh - min_w);
  if (area <= 0) return 0;
  Rng rng(seed);
  long hits = 0;
  for (int i = 0; i < samples; ++i) {
    const double cx = rng.uniform(min_c, ref.cost);
    const double cw = rng.uniform(min_w, ref.wh);
    for (const auto& p : pts)
      if (p.cost <= cx && p.wh <= cw) {
        hits += 1;
        break;
      }
  }
  return area * double(hits) / double(samples);
}

void criterion_5_hypervolume() {
  bool ok = hypervolume(std::vector<ObjectivePoint>{{1, 1}}, {2, 2}) == 1.0;
  ok = ok &&
       hypervolume(std::vector<ObjectivePoint>{{1, 2}, {2, 1}}, {3, 3}) == 3.0;
  double worst = 0;
  Rng rng(515);
  for (int set = 0; set < 20; ++set) {
    std::vector<ObjectivePoint> pts;
    const int n = rng.uniform_int(1, 15);
    for (int i = 0; i < n; ++i)
      pts.push_back({rng.uniform(0, 8), rng.uniform(0, 8)});
    const ObjectivePoint ref{9, 9};
    const double exact = hypervolume(pts, ref);
    const double mc = mc_hypervolume(pts, ref, 1000000, 7000 + set);
    const double rel = std::abs(exact - mc) / std::max(1e-12, mc);
    worst = std::max(worst, rel);
    ok = ok && rel <= 0.01;
  }
  std::ostringstream d;
  d << "hand values exact, 20 random sets vs 1e6-sample Monte-Carlo, worst "
       "rel "
    << worst;
  report(5, ok, "hypervolume exactness", d.str());
}

// ---------------------------------------------------------------------------
// criterion 6: property suites (>= 1000 cases each) + per-run invariants
// ---------------------------------------------------------------------------

bool dominance_laws() {
  Rng rng(61);
  for (int i = 0; i < 1000; ++i) {
    const ObjectivePoint a{rng.uniform(0, 10), rng.uniform(0, 10)};
    const ObjectivePoint b{rng.uniform(0, 10), rng.uniform(0, 10)};
    const ObjectivePoint c{rng.uniform(0, 10), rng.uniform(0, 10)};
    if (dominates(a, a)) return false;
    if (dominates(a, b) && dominates(b, a)) return false;
    if (dominates(a, b) && dominates(b, c) && !dominates(a, c)) return false;
  }
  return true;
}

bool cost_laws() {
  Rng rng(62);
  for (int i = 0; i < 1000; ++i) {
    BreakwaterSystem a, b;
    auto rnd_line = [&]() {
      Polyline line;
      const int n = rng.uniform_int(2, 5);
      for (int k = 0; k < n; ++k)
        line.push_back({rng.uniform(0, 60), rng.uniform(0, 60)});
      return line;
    };
    for (int k = rng.uniform_int(1, 3); k-- > 0;)
      a.breakwaters.push_back(rnd_line());
    for (int k = rng.uniform_int(1, 3); k-- > 0;)
      b.breakwaters.push_back(rnd_line());
    BreakwaterSystem ab = a;
    for (const auto& l : b.breakwaters) ab.breakwaters.push_back(l);
    if (std::abs(cost(ab) - cost(a) - cost(b)) > 1e-9) return false;
    BreakwaterSystem rev = ab;
    std::reverse(rev.breakwaters.begin(), rev.breakwaters.end());
    std::reverse(rev.breakwaters[0].begin(), rev.breakwaters[0].end());
    if (std::abs(cost(rev) - cost(ab)) > 1e-9) return false;
    if (cost(ab) < 0) return false;
  }
  return true;
}

bool epsilon_monotonicity() {
  auto dom = synthetic_case(32);
  Rng rng(63);
  int exercised = 0;
  for (int i = 0; i < 1000; ++i) {
    BreakwaterSystem sys;
    const int n = rng.uniform_int(1, 2);
    for (int b = 0; b < n; ++b) {
      Polyline line;
      for (int k = 0; k < 2; ++k)
        line.push_back({rng.uniform(0, 32), rng.uniform(0, 32)});
      if (line[0] == line[1]) line[1].x += 0.5;
      sys.breakwaters.push_back(line);
    }
    DomainConfig strict = dom;
    strict.epsilon = rng.uniform(1.0, 3.0);
    strict.finalize();
    DomainConfig lax = dom;
    lax.epsilon = strict.epsilon * rng.uniform(0.0, 1.0);
    lax.finalize();
    if (check_constraints(sys, strict).feasible) {
      exercised += 1;
      if (!check_constraints(sys, lax).feasible) return false;
    }
  }
  return exercised > 50;
}

bool reproduce_feasibility() {
  const auto dom = synthetic_case(32);
  const auto parents = init_population(dom, 12, 64);
  EAConfig cfg;
  cfg.mutation_rate = 0.35;
  const auto kids = reproduce(parents, dom, cfg, 6400, 1000);
  for (const auto& k : kids)
    if (!check_constraints(k, dom).feasible) return false;
  return kids.size() == 1000;
}

// ---------------------------------------------------------------------------
// shared desk-scale assets
// ---------------------------------------------------------------------------

TrainingDataset build_dataset(const DomainConfig& dom, int count,
                              uint64_t seed) {
  TrainingDataset ds;
  ds.width = dom.width;
  ds.height = dom.height;
  ds.n_targets = int(dom.targets.size());
  ds.domain_text = domain_to_text(dom);
  const auto genos = init_population(dom, count, Rng::derive(seed, 0xd5));
  for (size_t i = 0; i < genos.size(); ++i) {
    const WaveField field = simulate(genos[i], dom);
    ds.add(genos[i], Rng::derive(seed, 0x6d736b00ULL, i), field,
           wave_height_at_targets(field, dom));
  }
  return ds;
}

}  // namespace

int main() {
  const auto suite_t0 = std::chrono::steady_clock::now();
  const fs::path work =
      fs::temp_directory_path() / "breakwater_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  criterion_4_gradients();
  criterion_5_hypervolume();

  // ---- criterion 2: surrogate quality on 200 desk-scale records ----------
  const DomainConfig dom = synthetic_case(64);
  const TrainingDataset dataset = build_dataset(dom, 200, 2025);
  SurrogateModel surrogate = make_surrogate(dom);
  SurrogateTrainOptions sopts;
  sopts.seed = 11;
  const auto srep = train_surrogate(surrogate, dataset, dom, sopts);
  double mean_target = 0;
  size_t n_targets = 0;
  for (const auto& rec : dataset.records)
    for (double h : rec.target_heights) {
      mean_target += h;
      n_targets += 1;
    }
  mean_target /= double(n_targets);
  {
    const bool ok =
        srep.test_mape <= 10.0 && srep.test_mae <= 0.1 * mean_target;
    std::ostringstream d;
    d << "test MAPE " << srep.test_mape << "% (<= 10%), MAE " << srep.test_mae
      << " (<= " << 0.1 * mean_target << ")";
    report(2, ok, "surrogate quality on 200 oracle records", d.str());
  }

  // ---- criterion 3: assistant quality -------------------------------------
  {
    bool ok = false;
    std::ostringstream d;
    try {
      const auto labels = label_dataset(surrogate, dataset, dom, 0.05);
      size_t n_pos = 0;
      for (const auto& l : labels) n_pos += l.label;
      AssistantModel assistant = make_assistant(dom);
      AssistantTrainOptions aopts;
      aopts.seed = 12;
      const auto arep = train_assistant(assistant, dataset, labels, dom, aopts);

      std::vector<LabeledRecord> validation;
      for (size_t idx : arep.test_indices) validation.push_back(labels[idx]);
      std::vector<double> scores;
      std::vector<int> vlabels;
      for (const auto& l : validation) {
        const auto& rec = dataset.records[l.record_index];
        scores.push_back(
            assistant_score(assistant, encode(rec.genotype, dom,
                                              rec.mask_seed)));
        vlabels.push_back(l.label);
      }
      const auto cal = calibrate_threshold(scores, vlabels);
      auto tpr_at = [&](double t) {
        size_t tp = 0, pos = 0;
        for (size_t i = 0; i < scores.size(); ++i)
          if (vlabels[i]) {
            pos += 1;
            if (scores[i] >= t) tp += 1;
          }
        return pos ? double(tp) / double(pos) : 0.0;
      };
      const bool tpr_ok = tpr_at(cal.t) >= tpr_at(cal.t_star) - 1e-12;
      ok = arep.roc_auc >= 0.65 && tpr_ok;
      d << "ROC-AUC " << arep.roc_auc << " (>= 0.65), labels " << n_pos << "/"
        << labels.size() << " positive, TPR(t)=" << tpr_at(cal.t)
        << " >= TPR(t*)=" << tpr_at(cal.t_star);
    } catch (const std::exception& e) {
      d << "failed: " << e.what();
    }
    report(3, ok, "assistant quality and threshold calibration", d.str());
  }

  // ---- criterion 8: oracle/surrogate speed ratio --------------------------
  {
    const auto probes = init_population(dom, 100, 888);
    // warm up
    simulate(probes[0], dom);
    predict_unchecked(surrogate, encode(probes[0], dom, 1), dom);

    std::vector<double> sim_ms, pred_ms;
    for (int i = 0; i < 100; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      simulate(probes[i], dom);
      const auto t1 = std::chrono::steady_clock::now();
      sim_ms.push_back(
          std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::vector<InputMask> masks;
    for (int i = 0; i < 100; ++i)
      masks.push_back(encode(probes[i], dom, 1000 + i));
    for (int i = 0; i < 100; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      predict_unchecked(surrogate, masks[i], dom);
      const auto t1 = std::chrono::steady_clock::now();
      pred_ms.push_back(
          std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    const double sim_med = median(sim_ms), pred_med = median(pred_ms);
    const double ratio = sim_med / pred_med;
    const bool ok = ratio >= 20.0 && sim_med <= 50.0;
    std::ostringstream d;
    d << "simulate median " << sim_med << " ms (<= 50), surrogate median "
      << pred_med << " ms, ratio " << ratio << " (>= 20)";
    report(8, ok, "oracle/surrogate speed ratio", d.str());
  }

  // ---- criterion 7: byte-identical compare reruns -------------------------
  {
    ExperimentSpec spec;
    spec.domain_source = "synthetic:32";
    spec.approaches = {Approach::proposed, Approach::baseline};
    spec.seeds = {1, 2};
    spec.base.init_size = 60;
    spec.base.pop_size = 16;
    spec.base.arch_size = 8;
    spec.base.real_eval_budget = 130;
    spec.base.prep_equiv = 10;
    spec.base.surrogate_train.epochs = 8;
    spec.base.surrogate_train.min_records = 20;
    spec.base.assistant_train.epochs = 5;
    spec.threads = 2;
    spec.out_dir = (work / "det_a").string();
    run_compare_command(spec);
    ExperimentSpec spec_b = spec;
    spec_b.out_dir = (work / "det_b").string();
    run_compare_command(spec_b);

    bool ok = true;
    std::string first_diff;
    for (const char* rel :
         {"summary.csv", "efficiency_seeds.csv", "quantiles_proposed.csv",
          "quantiles_baseline.csv", "proposed_seed1/trace.csv",
          "proposed_seed2/trace.csv", "baseline_seed1/trace.csv",
          "proposed_seed1/archive.csv", "proposed_seed1/geometry.txt"}) {
      const std::string a = read_text_file((work / "det_a" / rel).string());
      const std::string b = read_text_file((work / "det_b" / rel).string());
      if (a != b) {
        ok = false;
        if (first_diff.empty()) first_diff = rel;
      }
    }
    report(7, ok, "byte-identical compare CSVs under equal seeds",
           ok ? "all artifacts identical across reruns"
              : "first differing file: " + first_diff);
  }

  // ---- criterion 1: four-approach ordering at desk scale ------------------
  CompareOutcome outcome;
  bool compare_ok = false;
  double compare_minutes = 0;
  {
    ExperimentSpec spec;
    spec.domain_source = "synthetic:64";
    spec.approaches = {Approach::proposed, Approach::no_surrogate,
                       Approach::baseline, Approach::random_search};
    spec.seeds = {1, 2, 3, 4, 5};
    spec.out_dir = (work / "compare").string();
    spec.threads = 0;  // all cores
    const auto t0 = std::chrono::steady_clock::now();
    outcome = run_compare_command(spec);
    compare_minutes =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count() /
        60.0;

    auto row_of = [&](Approach a) -> const CompareRow& {
      for (const auto& r : outcome.rows)
        if (r.approach == a) return r;
      throw std::runtime_error("missing approach row");
    };
    const double hv_p = row_of(Approach::proposed).median_final_hv;
    const double hv_n = row_of(Approach::no_surrogate).median_final_hv;
    const double hv_b = row_of(Approach::baseline).median_final_hv;
    const double hv_r = row_of(Approach::random_search).median_final_hv;

    int negative_seeds = 0;
    const auto& eff = row_of(Approach::proposed).efficiency_per_seed;
    for (const auto& e : eff)
      if (e.cost_pct < 0 && e.wh_pct < 0) negative_seeds += 1;

    const bool order_ok =
        hv_p >= hv_n && hv_n >= hv_b && hv_b >= hv_r && hv_p > hv_b;
    const bool eff_ok = negative_seeds >= 3;
    const bool time_ok = compare_minutes <= 15.0;
    compare_ok = order_ok && eff_ok && time_ok;
    std::ostringstream d;
    d << "median final hv: proposed " << hv_p << " >= no_surrogate " << hv_n
      << " >= baseline " << hv_b << " >= random_search " << hv_r
      << "; cost%<0 and wh%<0 in " << negative_seeds << "/5 seeds; wall "
      << compare_minutes << " min (<= 15)";
    report(1, compare_ok, "four-approach ordering at desk scale", d.str());
  }

  // ---- criterion 6: invariant suites --------------------------------------
  {
    const bool laws = dominance_laws();
    const bool costs = cost_laws();
    const bool eps = epsilon_monotonicity();
    const bool repro = reproduce_feasibility();

    bool hv_monotone = true, provenance_ok = true;
    int proposed_runs = 0;
    for (const auto& run : outcome.runs) {
      if (run.approach != Approach::proposed) continue;
      proposed_runs += 1;
      for (size_t i = 1; i < run.result.trace.gens.size(); ++i)
        if (run.result.trace.gens[i].hv <
            run.result.trace.gens[i - 1].hv - 1e-12)
          hv_monotone = false;
      for (const auto& m : run.result.archive)
        if (m.provenance != EvalProvenance::real) provenance_ok = false;
    }
    const bool ok = laws && costs && eps && repro && hv_monotone &&
                    provenance_ok && proposed_runs == 5;
    std::ostringstream d;
    d << "dominance laws " << (laws ? "ok" : "FAIL") << ", cost laws "
      << (costs ? "ok" : "FAIL") << ", epsilon monotonicity "
      << (eps ? "ok" : "FAIL") << ", 1000 offspring feasible "
      << (repro ? "ok" : "FAIL") << ", archive hv monotone in "
      << proposed_runs << " seeded runs " << (hv_monotone ? "ok" : "FAIL")
      << ", archive provenance " << (provenance_ok ? "ok" : "FAIL");
    report(6, ok, "invariant suites", d.str());
  }

  const double total_min =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    suite_t0)
          .count() /
      60.0;
  std::printf("acceptance suite finished in %.1f min, %d failure(s)\n",
              total_min, failures);
  return failures;
}
