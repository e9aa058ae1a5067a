#pragma once

#include <span>
#include <string>
#include <vector>

#include "breakwater/domain.hpp"
#include "breakwater/geometry.hpp"
#include "breakwater/nn.hpp"
#include "breakwater/wavesim.hpp"

namespace breakwater {

// Three-channel encoding of a candidate over the water area:
//   ch0: obstacle raster (candidate | static structures | land), 0/1
//   ch1: unit-Gaussian noise, regenerated from `seed` per encoding
//   ch2: bathymetry scaled to [0, 1]
struct InputMask {
  nn::Tensor4<float> data;  // 1 x 3 x H x W
  uint64_t seed = 0;
};

InputMask encode(const BreakwaterSystem& sys, const DomainConfig& dom,
                 uint64_t seed);

struct TrainingRecord {
  BreakwaterSystem genotype;
  uint64_t mask_seed = 0;
  Grid<float> field;                   // real-oracle wave field
  std::vector<double> target_heights;  // real-oracle heights at targets
};

// Accumulated real-model evaluations; the only admissible source of truth
// values. Persisted exactly (binary round-trip); the file embeds the domain
// so it is self-contained.
struct TrainingDataset {
  int width = 0, height = 0, n_targets = 0;
  std::string domain_text;  // domain_to_text() of the generating domain
  std::vector<TrainingRecord> records;

  void add(const BreakwaterSystem& sys, uint64_t mask_seed,
           const WaveField& truth, const std::vector<double>& heights);
  void save(const std::string& path) const;
  static TrainingDataset load(const std::string& path);
};

enum class ModelState : uint8_t { untrained = 0, training = 1, ready = 2 };

// Encoder-decoder CNN over the input mask. Head 1 classifies every pixel
// into K wave-height bins; the per-pixel expected height is the
// probability-weighted bin center. Head 2 maps the expected heights
// gathered at the target pixels through a learned per-target affine.
struct SurrogateModel {
  nn::Network<float> net;
  std::vector<double> bin_edges;  // K+1, strictly increasing from 0
  std::vector<double> head2_scale;
  std::vector<double> head2_offset;
  ModelState state = ModelState::untrained;
  double test_mape = -1;
  double test_mae = -1;

  int bins() const { return int(bin_edges.empty() ? 0 : bin_edges.size() - 1); }
  double bin_center(int k) const {
    return 0.5 * (bin_edges[k] + bin_edges[k + 1]);
  }

  std::string to_bytes() const;
  static SurrogateModel from_bytes(const std::string& bytes, size_t* offset);
};

// Fresh untrained model sized for the domain.
SurrogateModel make_surrogate(const DomainConfig& dom, int bins = 16);

struct SurrogateTrainOptions {
  int epochs = 60;
  int batch = 12;
  double lambda1 = 1.0;  // pixel cross-entropy weight
  double lambda2 = 1.0;  // target MAE weight
  double lr_base = 1e-3;
  double lr_factor = 0.95;
  int lr_every = 5;
  double train_fraction = 0.8;
  double readiness_mape = 10.0;  // percent
  size_t min_records = 50;
  uint64_t seed = 1;
};

struct SurrogateTrainReport {
  double test_mape = -1;
  double test_mae = -1;
  double train_mae = -1;
  double over_fraction = 0;   // predicted above truth on evaluated targets
  double under_fraction = 0;  // predicted below truth (divergence risk)
  std::vector<double> epoch_losses;
  std::vector<size_t> train_indices;
  std::vector<size_t> test_indices;
};

// 80/20 split, ADAM, batch training of both heads. Sets model.state = ready
// iff the held-out MAPE is within opts.readiness_mape. Throws on datasets
// smaller than opts.min_records.
SurrogateTrainReport train_surrogate(SurrogateModel& model,
                                     const TrainingDataset& dataset,
                                     const DomainConfig& dom,
                                     const SurrogateTrainOptions& opts);

struct SurrogatePrediction {
  WaveField field;  // provenance = surrogate
  std::vector<double> target_heights;
};

// Requires state == ready; throws otherwise.
SurrogatePrediction predict(const SurrogateModel& model, const InputMask& mask,
                            const DomainConfig& dom);

// Same computation without the readiness gate (model evaluation tooling).
SurrogatePrediction predict_unchecked(const SurrogateModel& model,
                                      const InputMask& mask,
                                      const DomainConfig& dom);

struct SurrogateMetrics {
  double mape = 0;  // percent, over targets with truth > 0.05
  double mae = 0;
  double over_fraction = 0;
  double under_fraction = 0;
  size_t evaluated_targets = 0;
};

// MAPE/MAE over aligned prediction/truth pairs. Truths at or below the 0.05
// floor are excluded from MAPE (kept in MAE).
SurrogateMetrics metrics_from_pairs(std::span<const double> pred,
                                    std::span<const double> truth);

SurrogateMetrics surrogate_metrics(const SurrogateModel& model,
                                   const TrainingDataset& dataset,
                                   const DomainConfig& dom,
                                   std::span<const size_t> indices);

}  // namespace breakwater
