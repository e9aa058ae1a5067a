// breakwater: surrogate-assisted evolutionary design of coastal breakwaters.
//
// Subcommands:
//   optimize   run one or more optimizations, write traces and archives
//   compare    run the full approach comparison with quantile aggregation
//   surrogate  gendata / train / eval for the CNN surrogate + assistant
//
// Every flag can also be set through the environment with the BREAKWATER_
// prefix (e.g. BREAKWATER_BUDGET=500). Exit codes: 0 ok, 1 usage, 2 runtime.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "breakwater/assistant.hpp"
#include "breakwater/csv.hpp"
#include "breakwater/evolution.hpp"
#include "breakwater/experiment.hpp"
#include "breakwater/surrogate.hpp"

using namespace breakwater;

namespace {

struct CommonOpts {
  std::string domain = "synthetic";
  std::string out = "out";
  int budget = 400;
  int init_size = 200;
  int pop_size = 40;
  int arch_size = 20;
  double mutation_rate = 0.35;
  int prep_equiv = 26;
  int threads = 0;
  std::string external_cmd;
  std::vector<std::string> approaches;
  std::vector<uint64_t> seeds;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--domain", o.domain,
                  "synthetic, synthetic:<size>, or a domain file path")
      ->envname("BREAKWATER_DOMAIN");
  cmd->add_option("--out", o.out, "output directory")
      ->envname("BREAKWATER_OUT");
  cmd->add_option("--budget", o.budget, "real-model evaluation budget")
      ->envname("BREAKWATER_BUDGET");
  cmd->add_option("--init-size", o.init_size, "initialization population size")
      ->envname("BREAKWATER_INIT_SIZE");
  cmd->add_option("--pop-size", o.pop_size, "population size")
      ->envname("BREAKWATER_POP_SIZE");
  cmd->add_option("--arch-size", o.arch_size, "archive size")
      ->envname("BREAKWATER_ARCH_SIZE");
  cmd->add_option("--mutation-rate", o.mutation_rate, "mutation probability")
      ->envname("BREAKWATER_MUTATION_RATE");
  cmd->add_option("--prep-equiv", o.prep_equiv,
                  "surrogate preparation cost in real-eval equivalents")
      ->envname("BREAKWATER_PREP_EQUIV");
  cmd->add_option("--threads", o.threads, "parallel runs (0 = hardware)")
      ->envname("BREAKWATER_THREADS");
  cmd->add_option("--external-model-cmd", o.external_cmd,
                  "shell command implementing the wave-model exchange")
      ->envname("BREAKWATER_EXTERNAL_MODEL_CMD");
}

ExperimentSpec make_spec(const CommonOpts& o) {
  ExperimentSpec spec;
  spec.domain_source = o.domain;
  spec.out_dir = o.out;
  spec.threads = o.threads;
  spec.external_cmd = o.external_cmd;
  spec.base.real_eval_budget = o.budget;
  spec.base.init_size = o.init_size;
  spec.base.pop_size = o.pop_size;
  spec.base.arch_size = o.arch_size;
  spec.base.mutation_rate = o.mutation_rate;
  spec.base.prep_equiv = o.prep_equiv;
  for (const auto& name : o.approaches) {
    const auto a = approach_from_name(name);
    if (!a)
      throw CLI::ValidationError("--approach",
                                 "unknown approach '" + name + "'");
    spec.approaches.push_back(*a);
  }
  spec.seeds = o.seeds;
  return spec;
}

uint64_t mask_seed_for_record(uint64_t seed, uint64_t index) {
  return Rng::derive(seed, 0x6d736b00ULL, index);
}

int cmd_surrogate_gendata(const std::string& domain, int count, uint64_t seed,
                          const std::string& out) {
  const DomainConfig dom = resolve_domain(domain);
  TrainingDataset ds;
  ds.width = dom.width;
  ds.height = dom.height;
  ds.n_targets = int(dom.targets.size());
  ds.domain_text = domain_to_text(dom);
  const auto genotypes =
      init_population(dom, count, Rng::derive(seed, 0x67646174ULL));
  for (size_t i = 0; i < genotypes.size(); ++i) {
    const WaveField field = simulate(genotypes[i], dom);
    const auto heights = wave_height_at_targets(field, dom);
    ds.add(genotypes[i], mask_seed_for_record(seed, i), field, heights);
  }
  ds.save(out);
  std::cout << "wrote " << ds.records.size() << " oracle records to " << out
            << "\n";
  return 0;
}

int cmd_surrogate_train(const std::string& dataset_path,
                        const std::string& out, int epochs,
                        int assistant_epochs, uint64_t seed,
                        size_t min_records, double err_threshold) {
  const TrainingDataset ds = TrainingDataset::load(dataset_path);
  const DomainConfig dom = domain_from_text(ds.domain_text);

  SurrogateBundle bundle;
  bundle.surrogate = make_surrogate(dom);
  SurrogateTrainOptions sopts;
  sopts.epochs = epochs;
  sopts.seed = seed;
  sopts.min_records = min_records;
  const auto report = train_surrogate(bundle.surrogate, ds, dom, sopts);
  for (size_t e = 0; e < report.epoch_losses.size(); ++e)
    std::cout << "epoch " << e << " loss "
              << format_double(report.epoch_losses[e]) << "\n";
  std::cout << "test MAPE " << format_double(report.test_mape) << "% MAE "
            << format_double(report.test_mae) << " (over "
            << format_double(report.over_fraction * 100) << "% / under "
            << format_double(report.under_fraction * 100) << "%)\n";
  std::cout << "surrogate state: "
            << (bundle.surrogate.state == ModelState::ready ? "ready"
                                                            : "not ready")
            << "\n";

  const auto labels = label_dataset(bundle.surrogate, ds, dom, err_threshold);
  size_t n_pos = 0;
  for (const auto& l : labels) n_pos += l.label;
  if (n_pos > 0 && n_pos < labels.size()) {
    bundle.assistant = make_assistant(dom);
    AssistantTrainOptions aopts;
    aopts.epochs = assistant_epochs;
    aopts.seed = seed;
    try {
      const auto arep =
          train_assistant(bundle.assistant, ds, labels, dom, aopts);
      bundle.assistant_roc_auc = arep.roc_auc;
      std::vector<LabeledRecord> validation;
      for (size_t idx : arep.test_indices) validation.push_back(labels[idx]);
      size_t v_pos = 0;
      for (const auto& l : validation) v_pos += l.label;
      if (v_pos > 0 && v_pos < validation.size()) {
        const auto cal = calibrate_threshold(bundle.assistant, ds, validation,
                                             dom);
        std::cout << "assistant ROC-AUC " << format_double(arep.roc_auc)
                  << ", threshold " << format_double(cal.t) << " (crossing "
                  << format_double(cal.t_star) << ")\n";
      } else {
        std::cout << "assistant trained; validation is single-class, "
                     "threshold not calibrated\n";
      }
    } catch (const std::runtime_error& e) {
      std::cout << "assistant not trained: " << e.what() << "\n";
    }
  } else {
    std::cout << "labels are single-class (" << n_pos << "/" << labels.size()
              << " positive); assistant not trained\n";
  }
  bundle.save(out);
  std::cout << "bundle written to " << out << "\n";
  return 0;
}

int cmd_surrogate_eval(const std::string& dataset_path,
                       const std::string& bundle_path, const std::string& out,
                       double err_threshold) {
  const TrainingDataset ds = TrainingDataset::load(dataset_path);
  const DomainConfig dom = domain_from_text(ds.domain_text);
  const SurrogateBundle bundle = SurrogateBundle::load(bundle_path);

  std::filesystem::create_directories(out);
  std::vector<size_t> all(ds.records.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto metrics = surrogate_metrics(bundle.surrogate, ds, dom, all);
  std::cout << "MAPE " << format_double(metrics.mape) << "%\n";
  std::cout << "MAE " << format_double(metrics.mae) << "\n";
  std::cout << "overestimated " << format_double(metrics.over_fraction * 100)
            << "%, underestimated "
            << format_double(metrics.under_fraction * 100) << "%\n";

  // predicted-vs-real scatter, one row per target evaluation
  std::string scatter = "record,target,real,predicted\n";
  for (size_t i = 0; i < ds.records.size(); ++i) {
    const auto& rec = ds.records[i];
    const InputMask mask = encode(rec.genotype, dom, rec.mask_seed);
    const auto pred = predict_unchecked(bundle.surrogate, mask, dom);
    for (size_t t = 0; t < rec.target_heights.size(); ++t) {
      scatter += std::to_string(i) + "," + std::to_string(t) + "," +
                 format_double(rec.target_heights[t]) + "," +
                 format_double(pred.target_heights[t]) + "\n";
    }
  }
  write_text_file(out + "/scatter.csv", scatter);

  const auto labels = label_dataset(bundle.surrogate, ds, dom, err_threshold);
  size_t n_pos = 0;
  for (const auto& l : labels) n_pos += l.label;
  if (n_pos > 0 && n_pos < labels.size() &&
      bundle.assistant.state != ModelState::untrained) {
    std::vector<double> scores;
    std::vector<int> lab;
    for (const auto& l : labels) {
      const auto& rec = ds.records[l.record_index];
      const InputMask mask = encode(rec.genotype, dom, rec.mask_seed);
      scores.push_back(assistant_score(bundle.assistant, mask));
      lab.push_back(l.label);
    }
    std::string rates = "threshold,tpr,tnr\n";
    for (const auto& row : rate_table(scores, lab))
      rates += format_double(row.threshold) + "," + format_double(row.tpr) +
               "," + format_double(row.tnr) + "\n";
    write_text_file(out + "/rates.csv", rates);
    std::cout << "assistant ROC-AUC on this dataset "
              << format_double(roc_auc(scores, lab)) << "\n";
  } else {
    std::cout << "rates.csv skipped (single-class labels or untrained "
                 "assistant)\n";
  }
  std::cout << "reports written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surrogate-assisted evolutionary breakwater design"};
  app.require_subcommand(1);

  // ---- optimize ----
  CommonOpts opt_o;
  opt_o.approaches = {"proposed"};
  opt_o.seeds = {1};
  auto* optimize_cmd =
      app.add_subcommand("optimize", "run optimizations and write artifacts");
  add_common(optimize_cmd, opt_o);
  optimize_cmd
      ->add_option("--approach", opt_o.approaches,
                   "proposed|no_surrogate|baseline|random_search")
      ->envname("BREAKWATER_APPROACH");
  optimize_cmd->add_option("--seed,--seeds", opt_o.seeds, "run seeds")
      ->envname("BREAKWATER_SEEDS");

  // ---- compare ----
  CommonOpts opt_c;
  opt_c.approaches = {"proposed", "no_surrogate", "baseline", "random_search"};
  opt_c.seeds = {1, 2, 3, 4, 5};
  auto* compare_cmd = app.add_subcommand(
      "compare", "compare approaches with quantile traces and a summary");
  add_common(compare_cmd, opt_c);
  compare_cmd
      ->add_option("--approach,--approaches", opt_c.approaches,
                   "approaches to compare")
      ->envname("BREAKWATER_APPROACHES");
  compare_cmd->add_option("--seeds", opt_c.seeds, "run seeds")
      ->envname("BREAKWATER_SEEDS");

  // ---- surrogate ----
  auto* surr_cmd =
      app.add_subcommand("surrogate", "offline surrogate/assistant tooling");
  surr_cmd->require_subcommand(1);

  std::string g_domain = "synthetic", g_out = "dataset.bwd";
  int g_count = 200;
  uint64_t g_seed = 1;
  auto* gendata_cmd = surr_cmd->add_subcommand(
      "gendata", "sample feasible systems and run the oracle");
  gendata_cmd->add_option("--domain", g_domain, "domain source")
      ->envname("BREAKWATER_DOMAIN");
  gendata_cmd->add_option("--count", g_count, "number of records");
  gendata_cmd->add_option("--seed", g_seed, "sampling seed");
  gendata_cmd->add_option("--out", g_out, "dataset output file");

  std::string t_dataset, t_out = "bundle.bwm";
  int t_epochs = 60, t_assistant_epochs = 30;
  uint64_t t_seed = 1;
  size_t t_min_records = 2;
  double t_err = 0.05;
  auto* train_cmd =
      surr_cmd->add_subcommand("train", "train surrogate + assistant");
  train_cmd->add_option("--dataset", t_dataset, "dataset file")->required();
  train_cmd->add_option("--out", t_out, "bundle output file");
  train_cmd->add_option("--epochs", t_epochs, "surrogate epochs");
  train_cmd->add_option("--assistant-epochs", t_assistant_epochs,
                        "assistant epochs");
  train_cmd->add_option("--seed", t_seed, "training seed");
  train_cmd->add_option("--min-records", t_min_records,
                        "minimum dataset size accepted");
  train_cmd->add_option("--err-threshold", t_err,
                        "relative error labeling threshold");

  std::string e_dataset, e_bundle, e_out = "eval";
  double e_err = 0.05;
  auto* eval_cmd =
      surr_cmd->add_subcommand("eval", "evaluate a trained bundle");
  eval_cmd->add_option("--dataset", e_dataset, "dataset file")->required();
  eval_cmd->add_option("--bundle", e_bundle, "bundle file")->required();
  eval_cmd->add_option("--out", e_out, "report directory");
  eval_cmd->add_option("--err-threshold", e_err,
                       "relative error labeling threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (optimize_cmd->parsed()) {
      const auto runs = run_optimize_command(make_spec(opt_o));
      for (const auto& run : runs) {
        std::cout << approach_name(run.approach) << " seed " << run.seed
                  << ": " << run.result.archive.size() << " archive members, "
                  << run.result.real_evals << " real evals, "
                  << run.result.surrogate_evals << " surrogate evals -> "
                  << run.dir << "\n";
      }
      return 0;
    }
    if (compare_cmd->parsed()) {
      const auto outcome = run_compare_command(make_spec(opt_c));
      std::cout << "reference (" << format_double(outcome.reference.cost)
                << ", " << format_double(outcome.reference.wh) << ")\n";
      for (const auto& row : outcome.rows) {
        std::cout << approach_name(row.approach) << ": median final hv "
                  << format_double(row.median_final_hv) << " ("
                  << format_double(row.median_final_hv_norm * 100)
                  << "% of box), cost% " << format_double(row.cost_pct)
                  << ", wh% " << format_double(row.wh_pct) << "\n";
      }
      return 0;
    }
    if (gendata_cmd->parsed())
      return cmd_surrogate_gendata(g_domain, g_count, g_seed, g_out);
    if (train_cmd->parsed())
      return cmd_surrogate_train(t_dataset, t_out, t_epochs, t_assistant_epochs,
                                 t_seed, t_min_records, t_err);
    if (eval_cmd->parsed())
      return cmd_surrogate_eval(e_dataset, e_bundle, e_out, e_err);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
