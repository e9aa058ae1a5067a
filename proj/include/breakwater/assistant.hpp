#pragma once

#include <span>
#include <string>
#include <vector>

#include "breakwater/surrogate.hpp"

namespace breakwater {

// Binary classifier with the surrogate's input encoding and a single
// error-probability logit; scores above the calibrated threshold route a
// candidate to the real model.
struct AssistantModel {
  nn::Network<float> net;
  double threshold = -1;  // in (0,1) once calibrated
  ModelState state = ModelState::untrained;
  double roc_auc = -1;

  bool calibrated() const { return threshold > 0 && threshold < 1; }

  std::string to_bytes() const;
  static AssistantModel from_bytes(const std::string& bytes, size_t* offset);
};

AssistantModel make_assistant(const DomainConfig& dom);

struct LabeledRecord {
  size_t record_index = 0;
  int label = 0;        // 1 = recalculate with the real model
  double rel_error = 0;
};

// Labels every dataset record by the surrogate's relative error on the
// summed target height; label 1 iff the error strictly exceeds
// err_threshold. Requires a trained surrogate.
std::vector<LabeledRecord> label_dataset(const SurrogateModel& surrogate,
                                         const TrainingDataset& dataset,
                                         const DomainConfig& dom,
                                         double err_threshold = 0.05);

struct AssistantTrainOptions {
  int epochs = 30;
  int batch = 12;
  double lr_base = 1e-3;
  double lr_factor = 0.95;
  int lr_every = 5;
  double train_fraction = 0.8;
  uint64_t seed = 1;
};

struct AssistantTrainReport {
  double roc_auc = -1;  // on the held-out split
  std::vector<double> epoch_losses;
  std::vector<size_t> train_indices;  // into the labeled record vector
  std::vector<size_t> test_indices;
};

// Trains the classifier with class-weighted binary cross-entropy (the
// positive class is usually rare). Throws when the training split contains
// a single class.
AssistantTrainReport train_assistant(AssistantModel& model,
                                     const TrainingDataset& dataset,
                                     std::span<const LabeledRecord> labels,
                                     const DomainConfig& dom,
                                     const AssistantTrainOptions& opts);

double assistant_score(const AssistantModel& model, const InputMask& mask);

// Rank-based ROC-AUC (ties get average ranks).
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct RateRow {
  double threshold = 0;
  double tpr = 0;
  double tnr = 0;
};

// TPR/TNR at n evenly spaced thresholds in (0,1); classification rule is
// score >= threshold -> positive.
std::vector<RateRow> rate_table(std::span<const double> scores,
                                std::span<const int> labels,
                                int n_thresholds = 512);

struct Calibration {
  double t_star = 0;  // TPR/TNR crossing (midpoint of the closest-approach band)
  double t = 0;       // deployed threshold, 10% to the left of t_star
  std::vector<RateRow> table;
};

// Sweeps thresholds, finds the TPR/TNR intersection (closest approach, with
// the midpoint of the tied band), and retreats 10% to the left of it, which
// can only raise TPR. Throws when validation has a single class.
Calibration calibrate_threshold(std::span<const double> scores,
                                std::span<const int> labels,
                                int n_thresholds = 512);

// Calibrates `model` on validation records and stores the threshold.
Calibration calibrate_threshold(AssistantModel& model,
                                const TrainingDataset& dataset,
                                std::span<const LabeledRecord> validation,
                                const DomainConfig& dom);

enum class Route { use_surrogate, use_real };

// score >= threshold routes to the real model (conservative tie-break).
Route route(const AssistantModel& model, const InputMask& mask);

// Everything the optimizer needs to dispatch evaluations, persisted as one
// checkpoint file.
struct SurrogateBundle {
  SurrogateModel surrogate;
  AssistantModel assistant;
  double assistant_roc_auc = -1;

  void save(const std::string& path) const;
  static SurrogateBundle load(const std::string& path);
};

}  // namespace breakwater
