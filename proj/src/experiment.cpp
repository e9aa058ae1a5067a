#include "breakwater/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "breakwater/csv.hpp"
#include "breakwater/svg.hpp"

namespace breakwater {

namespace fs = std::filesystem;

void ExperimentSpec::validate() const {
  if (approaches.empty())
    throw std::runtime_error("experiment: at least one approach required");
  if (seeds.empty())
    throw std::runtime_error("experiment: at least one seed required");
  if (out_dir.empty()) throw std::runtime_error("experiment: empty out dir");
}

DomainConfig resolve_domain(const std::string& source) {
  if (source == "synthetic") return synthetic_case();
  if (source.rfind("synthetic:", 0) == 0) {
    const int size = std::stoi(source.substr(10));
    return synthetic_case(size);
  }
  return load_domain(source);
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

std::string trace_to_csv(const RunTrace& trace, ObjectivePoint reference) {
  std::ostringstream out;
  out << "# hv_reference," << format_double(reference.cost) << ","
      << format_double(reference.wh) << "\n";
  out << "gen,real_evals,surrogate_evals,hv,archive\n";
  for (const auto& g : trace.gens) {
    out << g.gen << "," << g.real_evals << "," << g.surrogate_evals << ","
        << format_double(g.hv) << ",";
    for (size_t i = 0; i < g.archive.size(); ++i) {
      if (i) out << ';';
      out << format_double(g.archive[i].cost) << ':'
          << format_double(g.archive[i].wh);
    }
    out << "\n";
  }
  return out.str();
}

std::string archive_to_csv(const std::vector<Individual>& archive) {
  std::ostringstream out;
  out << "index,cost,wh,provenance\n";
  for (size_t i = 0; i < archive.size(); ++i) {
    out << i << "," << format_double(archive[i].objectives.cost) << ","
        << format_double(archive[i].objectives.wh) << ","
        << (archive[i].provenance == EvalProvenance::real ? "real"
                                                          : "surrogate")
        << "\n";
  }
  return out.str();
}

std::string archive_geometry_text(const std::vector<Individual>& archive) {
  std::ostringstream out;
  out << "archive " << archive.size() << "\n";
  for (size_t i = 0; i < archive.size(); ++i) {
    const auto& ind = archive[i];
    out << "individual " << i << " cost "
        << format_double(ind.objectives.cost) << " wh "
        << format_double(ind.objectives.wh) << "\n";
    out << "breakwaters " << ind.genotype.breakwaters.size() << "\n";
    for (const auto& line : ind.genotype.breakwaters) {
      out << line.size();
      for (const auto& p : line)
        out << " " << format_double(p.x) << " " << format_double(p.y);
      out << "\n";
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// run pool
// ---------------------------------------------------------------------------

std::vector<RunArtifacts> run_all(const ExperimentSpec& spec,
                                  const DomainConfig& dom) {
  std::vector<RunArtifacts> runs;
  for (const auto a : spec.approaches)
    for (const auto s : spec.seeds) {
      RunArtifacts r;
      r.approach = a;
      r.seed = s;
      runs.push_back(std::move(r));
    }

  const int n_threads = spec.threads > 0
                            ? spec.threads
                            : std::max(1u, std::thread::hardware_concurrency());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= runs.size()) return;
      EAConfig cfg = spec.base;
      cfg.approach = runs[i].approach;
      cfg.seed = runs[i].seed;
      OracleFn oracle;
      if (!spec.external_cmd.empty()) {
        // one exchange directory per run; external calls are serialized
        // within a run
        const std::string dir = spec.out_dir + "/exchange_" +
                                approach_name(runs[i].approach) + "_seed" +
                                std::to_string(runs[i].seed);
        const std::string cmd = spec.external_cmd;
        const DomainConfig* dom_ptr = &dom;
        oracle = [dir, cmd, dom_ptr](const BreakwaterSystem& sys) {
          return external_simulate(sys, *dom_ptr,
                                   {cmd, dir, 300.0});
        };
      }
      runs[i].result = optimize(dom, cfg, oracle);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return runs;
}

namespace {

void write_run_dir(RunArtifacts& run, const std::string& out_dir,
                   ObjectivePoint reference) {
  run.dir = out_dir + "/" + approach_name(run.approach) + "_seed" +
            std::to_string(run.seed);
  fs::create_directories(run.dir);
  fill_trace_hypervolume(run.result.trace, reference);
  write_text_file(run.dir + "/trace.csv",
                  trace_to_csv(run.result.trace, reference));
  write_text_file(run.dir + "/archive.csv", archive_to_csv(run.result.archive));
  write_text_file(run.dir + "/geometry.txt",
                  archive_geometry_text(run.result.archive));
}

}  // namespace

std::vector<RunArtifacts> run_optimize_command(const ExperimentSpec& spec) {
  spec.validate();
  const DomainConfig dom = resolve_domain(spec.domain_source);
  fs::create_directories(spec.out_dir);
  auto runs = run_all(spec, dom);
  for (auto& run : runs) {
    const ObjectivePoint ref{run.result.nadir.cost * 1.05,
                             run.result.nadir.wh * 1.05};
    write_run_dir(run, spec.out_dir, ref);
  }
  return runs;
}

CompareOutcome run_compare_command(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.approaches.size() < 2)
    throw std::runtime_error("compare: needs at least two approaches");
  const DomainConfig dom = resolve_domain(spec.domain_source);
  fs::create_directories(spec.out_dir);

  CompareOutcome outcome;
  outcome.runs = run_all(spec, dom);

  // shared reference: 1.05 x componentwise max over every real-evaluated
  // point across all compared runs
  ObjectivePoint nadir{0, 0};
  for (const auto& run : outcome.runs) {
    nadir.cost = std::max(nadir.cost, run.result.nadir.cost);
    nadir.wh = std::max(nadir.wh, run.result.nadir.wh);
  }
  outcome.reference = {nadir.cost * 1.05, nadir.wh * 1.05};

  for (auto& run : outcome.runs) write_run_dir(run, spec.out_dir,
                                               outcome.reference);

  // quantile traces and the convergence plot
  const std::vector<std::string> palette = {"#1f77b4", "#d62728", "#2ca02c",
                                            "#9467bd", "#ff7f0e", "#8c564b"};
  std::vector<PlotSeries> series;
  for (size_t ai = 0; ai < spec.approaches.size(); ++ai) {
    const Approach a = spec.approaches[ai];
    std::vector<std::vector<TraceSample>> traces;
    for (const auto& run : outcome.runs) {
      if (run.approach != a) continue;
      std::vector<TraceSample> t;
      for (const auto& g : run.result.trace.gens)
        t.push_back({g.real_evals, g.hv});
      traces.push_back(std::move(t));
    }
    const auto q25 = quantile_trace(traces, 0.25);
    const auto q50 = quantile_trace(traces, 0.50);
    const auto q75 = quantile_trace(traces, 0.75);

    std::ostringstream csv;
    csv << "real_evals,hv_q25,hv_q50,hv_q75\n";
    PlotSeries s;
    s.label = approach_name(a);
    s.color = palette[ai % palette.size()];
    for (size_t i = 0; i < q50.size(); ++i) {
      csv << q50[i].real_evals << "," << format_double(q25[i].hv) << ","
          << format_double(q50[i].hv) << "," << format_double(q75[i].hv)
          << "\n";
      s.x.push_back(double(q50[i].real_evals));
      s.median.push_back(q50[i].hv);
      s.lo.push_back(q25[i].hv);
      s.hi.push_back(q75[i].hv);
    }
    write_text_file(spec.out_dir + "/quantiles_" +
                        std::string(approach_name(a)) + ".csv",
                    csv.str());
    series.push_back(std::move(s));
  }
  write_text_file(spec.out_dir + "/hv_convergence.svg",
                  render_line_plot(series, "Archive hypervolume convergence",
                                   "real model evaluations", "hypervolume"));

  // per-seed efficiency vs the baseline approach run with the same seed
  const bool have_baseline =
      std::find(spec.approaches.begin(), spec.approaches.end(),
                Approach::baseline) != spec.approaches.end();
  auto find_run = [&](Approach a, uint64_t seed) -> const RunArtifacts* {
    for (const auto& run : outcome.runs)
      if (run.approach == a && run.seed == seed) return &run;
    return nullptr;
  };

  std::ostringstream eff_csv;
  eff_csv << "approach,seed,cost_pct,wh_pct\n";
  const double box_area = outcome.reference.cost * outcome.reference.wh;
  for (const Approach a : spec.approaches) {
    CompareRow row;
    row.approach = a;
    for (uint64_t seed : spec.seeds) {
      const RunArtifacts* run = find_run(a, seed);
      if (!run) continue;
      row.final_hv_per_seed.push_back(run->result.trace.gens.empty()
                                          ? 0.0
                                          : run->result.trace.gens.back().hv);
      if (have_baseline) {
        const RunArtifacts* base = find_run(Approach::baseline, seed);
        if (base && !run->result.archive.empty() &&
            !base->result.archive.empty()) {
          std::vector<ObjectivePoint> pred, basepts;
          for (const auto& ind : run->result.archive)
            pred.push_back(ind.objectives);
          for (const auto& ind : base->result.archive)
            basepts.push_back(ind.objectives);
          const Efficiency e = efficiency(pred, basepts);
          row.efficiency_per_seed.push_back(e);
          eff_csv << approach_name(a) << "," << seed << ","
                  << format_double(e.cost_pct) << ","
                  << format_double(e.wh_pct) << "\n";
        }
      }
    }
    row.median_final_hv = nearest_rank_quantile(row.final_hv_per_seed, 0.5);
    row.median_final_hv_norm =
        box_area > 0 ? row.median_final_hv / box_area : 0.0;
    if (!row.efficiency_per_seed.empty()) {
      std::vector<double> c, w;
      for (const auto& e : row.efficiency_per_seed) {
        c.push_back(e.cost_pct);
        w.push_back(e.wh_pct);
      }
      row.cost_pct = nearest_rank_quantile(c, 0.5);
      row.wh_pct = nearest_rank_quantile(w, 0.5);
    }
    outcome.rows.push_back(std::move(row));
  }
  write_text_file(spec.out_dir + "/efficiency_seeds.csv", eff_csv.str());

  std::ostringstream summary;
  summary << "# hv_reference," << format_double(outcome.reference.cost) << ","
          << format_double(outcome.reference.wh) << "\n";
  summary << "approach,final_hv_median,final_hv_norm_median,cost_pct,wh_pct\n";
  for (const auto& row : outcome.rows) {
    summary << approach_name(row.approach) << ","
            << format_double(row.median_final_hv) << ","
            << format_double(row.median_final_hv_norm) << ","
            << format_double(row.cost_pct) << "," << format_double(row.wh_pct)
            << "\n";
  }
  write_text_file(spec.out_dir + "/summary.csv", summary.str());
  return outcome;
}

}  // namespace breakwater
