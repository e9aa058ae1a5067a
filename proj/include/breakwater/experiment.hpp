#pragma once

#include <string>
#include <vector>

#include "breakwater/evolution.hpp"
#include "breakwater/metrics.hpp"

namespace breakwater {

// One optimization campaign: approaches x seeds on one domain, artifacts
// written under out_dir.
struct ExperimentSpec {
  std::string domain_source = "synthetic";  // "synthetic", "synthetic:N" or a file path
  std::vector<Approach> approaches;
  std::vector<uint64_t> seeds;
  EAConfig base;           // approach/seed overridden per run
  std::string out_dir = "out";
  int threads = 0;         // 0 -> hardware concurrency
  std::string external_cmd;  // optional external wave model

  void validate() const;
};

DomainConfig resolve_domain(const std::string& source);

struct RunArtifacts {
  Approach approach;
  uint64_t seed = 0;
  RunResult result;
  std::string dir;  // run directory with trace.csv/archive.csv/geometry.txt
};

// Runs every approach x seed in a bounded thread pool (each run itself is
// single-threaded and fully seeded). Results come back in spec order.
std::vector<RunArtifacts> run_all(const ExperimentSpec& spec,
                                  const DomainConfig& dom);

// `optimize` command: per-run artifacts with the run-local hypervolume
// reference (1.05 x the run's own nadir).
std::vector<RunArtifacts> run_optimize_command(const ExperimentSpec& spec);

struct CompareRow {
  Approach approach;
  double median_final_hv = 0;
  double median_final_hv_norm = 0;  // fraction of the reference box
  double cost_pct = 0;              // median per-seed efficiency vs baseline
  double wh_pct = 0;
  std::vector<double> final_hv_per_seed;
  std::vector<Efficiency> efficiency_per_seed;
};

struct CompareOutcome {
  ObjectivePoint reference;  // 1.05 x global nadir across all runs
  std::vector<CompareRow> rows;
  std::vector<RunArtifacts> runs;
};

// `compare` command: all runs, one shared reference point, quantile traces,
// SVG convergence plot, and the efficiency summary versus the baseline.
CompareOutcome run_compare_command(const ExperimentSpec& spec);

// Serialization helpers shared by commands and tests.
std::string trace_to_csv(const RunTrace& trace, ObjectivePoint reference);
std::string archive_to_csv(const std::vector<Individual>& archive);
std::string archive_geometry_text(const std::vector<Individual>& archive);

}  // namespace breakwater
