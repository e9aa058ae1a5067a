#include "breakwater/assistant.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "breakwater/rng.hpp"

namespace breakwater {

AssistantModel make_assistant(const DomainConfig& dom) {
  if (dom.width % 8 || dom.height % 8)
    throw std::runtime_error(
        "assistant: grid dimensions must be divisible by 8");
  using L = nn::LayerSpec;
  nn::NetworkSpec spec;
  spec.in_channels = 3;
  spec.in_h = dom.height;
  spec.in_w = dom.width;
  // encoder mirrors the surrogate's; the head keeps the coarse spatial map
  // (where obstacles sit relative to the targets carries the signal)
  const int flat = 16 * (dom.height / 8) * (dom.width / 8);
  spec.layers = {
      L::conv3(3, 8, nn::Act::relu),
      L::maxpool(),
      L::conv3(8, 16, nn::Act::relu),
      L::maxpool(),
      L::conv3(16, 16, nn::Act::relu),
      L::maxpool(),
      L::conv3(16, 16, nn::Act::relu),
      L::fc(flat, 32, nn::Act::relu),
      L::fc(32, 1, nn::Act::none),  // error-probability logit
  };
  AssistantModel model;
  model.net = nn::Network<float>(spec);
  return model;
}

std::vector<LabeledRecord> label_dataset(const SurrogateModel& surrogate,
                                         const TrainingDataset& dataset,
                                         const DomainConfig& dom,
                                         double err_threshold) {
  if (surrogate.state == ModelState::untrained)
    throw std::runtime_error("label_dataset: surrogate is untrained");
  std::vector<LabeledRecord> out;
  out.reserve(dataset.records.size());
  for (size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& rec = dataset.records[i];
    const InputMask mask = encode(rec.genotype, dom, rec.mask_seed);
    const auto pred = predict_unchecked(surrogate, mask, dom);
    double pred_sum = 0, true_sum = 0;
    for (size_t t = 0; t < rec.target_heights.size(); ++t) {
      pred_sum += pred.target_heights[t];
      true_sum += rec.target_heights[t];
    }
    LabeledRecord lr;
    lr.record_index = i;
    lr.rel_error = std::abs(pred_sum - true_sum) / std::max(true_sum, 1e-12);
    lr.label = lr.rel_error > err_threshold ? 1 : 0;  // strict ">"
    out.push_back(lr);
  }
  return out;
}

double assistant_score(const AssistantModel& model, const InputMask& mask) {
  thread_local nn::Network<float>::Tape tape;  // reused across calls
  const auto& out = model.net.forward(mask.data, tape);
  return nn::sigmoid(double(out.v[0]));
}

AssistantTrainReport train_assistant(AssistantModel& model,
                                     const TrainingDataset& dataset,
                                     std::span<const LabeledRecord> labels,
                                     const DomainConfig& dom,
                                     const AssistantTrainOptions& opts) {
  if (labels.size() < 4)
    throw std::runtime_error("assistant train: too few labeled records");

  AssistantTrainReport report;
  std::vector<size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(Rng::derive(opts.seed, 0x61737370ULL));
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[split_rng.uniform_int(0, int(i) - 1)]);
  const size_t n_train = std::max<size_t>(
      2, size_t(std::floor(double(order.size()) * opts.train_fraction)));
  report.train_indices.assign(order.begin(), order.begin() + n_train);
  report.test_indices.assign(order.begin() + n_train, order.end());

  size_t n_pos = 0, n_neg = 0;
  for (size_t i : report.train_indices)
    (labels[i].label ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw std::runtime_error(
        "assistant train: training split contains a single class");
  const double pos_weight =
      std::clamp(double(n_neg) / double(n_pos), 0.1, 10.0);

  model.net.init_params(Rng::derive(opts.seed, 0x61696e69ULL));
  model.state = ModelState::training;
  auto adam = nn::make_adam_state(model.net);

  Rng epoch_rng(Rng::derive(opts.seed, 0x6165706fULL));
  std::vector<size_t> perm = report.train_indices;
  nn::Network<float>::Tape tape;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const double lr =
        nn::lr_schedule(epoch, opts.lr_base, opts.lr_factor, opts.lr_every);
    for (size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[epoch_rng.uniform_int(0, int(i) - 1)]);

    double epoch_loss = 0;
    size_t n_batches = 0;
    for (size_t start = 0; start < perm.size(); start += size_t(opts.batch)) {
      const size_t bsz = std::min(size_t(opts.batch), perm.size() - start);
      nn::Tensor4<float> batch(int(bsz), 3, dom.height, dom.width);
      std::vector<double> lab(bsz);
      for (size_t b = 0; b < bsz; ++b) {
        const auto& lrec = labels[perm[start + b]];
        const auto& rec = dataset.records[lrec.record_index];
        // fresh noise every epoch: the noise channel is a stand-in input,
        // and a fixed pattern would let the net memorize records by it
        const uint64_t noise_seed = Rng::derive(
            opts.seed, 0x6e6f6973ULL,
            uint64_t(lrec.record_index) * 100003ULL + uint64_t(epoch));
        const InputMask m = encode(rec.genotype, dom, noise_seed);
        std::copy_n(m.data.v.data(), m.data.size(),
                    batch.v.data() + b * m.data.size());
        lab[b] = double(lrec.label);
      }
      const auto& logits = model.net.forward(batch, tape);
      nn::Tensor4<float> dlogits(int(bsz), 1, 1, 1);
      double loss = 0;
      for (size_t b = 0; b < bsz; ++b) {
        const double w = lab[b] > 0.5 ? pos_weight : 1.0;
        const auto bce = nn::binary_cross_entropy_with_logit(
            double(logits.v[b]), lab[b], w);
        loss += bce.loss / double(bsz);
        dlogits.v[b] = float(bce.dlogit / double(bsz));
      }
      auto grads = model.net.backward(tape, dlogits);
      nn::adam_step(model.net, grads, adam, lr);
      epoch_loss += loss;
      n_batches += 1;
    }
    report.epoch_losses.push_back(epoch_loss / double(n_batches));
  }

  // held-out ROC-AUC
  if (!report.test_indices.empty()) {
    std::vector<double> scores;
    std::vector<int> truth;
    bool both = false;
    for (size_t i : report.test_indices) {
      const auto& lrec = labels[i];
      const auto& rec = dataset.records[lrec.record_index];
      const InputMask m = encode(rec.genotype, dom, rec.mask_seed);
      scores.push_back(assistant_score(model, m));
      truth.push_back(lrec.label);
    }
    both = std::count(truth.begin(), truth.end(), 1) > 0 &&
           std::count(truth.begin(), truth.end(), 0) > 0;
    if (both) {
      report.roc_auc = roc_auc(scores, truth);
      model.roc_auc = report.roc_auc;
    }
  }
  model.state = ModelState::ready;
  return report;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::runtime_error("roc_auc: bad input");
  const size_t n = scores.size();
  size_t n_pos = 0;
  for (int l : labels) n_pos += (l != 0);
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::runtime_error("roc_auc: single-class input");

  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // average ranks over tied scores, then Mann-Whitney
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double avg = 0.5 * double(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }
  double rank_sum_pos = 0;
  for (size_t k = 0; k < n; ++k)
    if (labels[k] != 0) rank_sum_pos += rank[k];
  const double u =
      rank_sum_pos - double(n_pos) * (double(n_pos) + 1.0) / 2.0;
  return u / (double(n_pos) * double(n_neg));
}

std::vector<RateRow> rate_table(std::span<const double> scores,
                                std::span<const int> labels,
                                int n_thresholds) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::runtime_error("rate_table: bad input");
  size_t n_pos = 0;
  for (int l : labels) n_pos += (l != 0);
  const size_t n_neg = scores.size() - n_pos;

  std::vector<RateRow> rows;
  rows.reserve(n_thresholds);
  for (int i = 0; i < n_thresholds; ++i) {
    const double t = (double(i) + 0.5) / double(n_thresholds);
    size_t tp = 0, tn = 0;
    for (size_t k = 0; k < scores.size(); ++k) {
      const bool positive = scores[k] >= t;
      if (labels[k] != 0 && positive) ++tp;
      if (labels[k] == 0 && !positive) ++tn;
    }
    RateRow row;
    row.threshold = t;
    row.tpr = n_pos ? double(tp) / double(n_pos) : 0.0;
    row.tnr = n_neg ? double(tn) / double(n_neg) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

Calibration calibrate_threshold(std::span<const double> scores,
                                std::span<const int> labels,
                                int n_thresholds) {
  size_t n_pos = 0;
  for (int l : labels) n_pos += (l != 0);
  if (n_pos == 0 || n_pos == labels.size())
    throw std::runtime_error("calibrate_threshold: single-class validation");

  Calibration cal;
  cal.table = rate_table(scores, labels, n_thresholds);
  double best = 2.0;
  for (const auto& row : cal.table)
    best = std::min(best, std::abs(row.tpr - row.tnr));
  // midpoint of the closest-approach band
  double first = -1, last = -1;
  for (const auto& row : cal.table) {
    if (std::abs(row.tpr - row.tnr) == best) {
      if (first < 0) first = row.threshold;
      last = row.threshold;
    }
  }
  cal.t_star = 0.5 * (first + last);
  cal.t = 0.9 * cal.t_star;  // retreat 10% to the left; TPR can only grow
  return cal;
}

Calibration calibrate_threshold(AssistantModel& model,
                                const TrainingDataset& dataset,
                                std::span<const LabeledRecord> validation,
                                const DomainConfig& dom) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& lrec : validation) {
    const auto& rec = dataset.records[lrec.record_index];
    const InputMask m = encode(rec.genotype, dom, rec.mask_seed);
    scores.push_back(assistant_score(model, m));
    labels.push_back(lrec.label);
  }
  Calibration cal = calibrate_threshold(scores, labels);
  model.threshold = cal.t;
  return cal;
}

Route route(const AssistantModel& model, const InputMask& mask) {
  if (!model.calibrated())
    throw std::runtime_error("route: assistant is not calibrated");
  return assistant_score(model, mask) >= model.threshold ? Route::use_real
                                                         : Route::use_surrogate;
}

// ---------------------------------------------------------------------------
// persistence
// ---------------------------------------------------------------------------

namespace {

template <class T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(const std::string& in, size_t& off) {
  if (off + sizeof(T) > in.size())
    throw std::runtime_error("assistant file: truncated");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

constexpr uint32_t kAssistantMagic = 0x4d415742;  // "BWAM"
constexpr uint32_t kBundleMagic = 0x42535742;     // "BWSB"

}  // namespace

std::string AssistantModel::to_bytes() const {
  std::string out;
  put(out, kAssistantMagic);
  put(out, uint32_t(1));
  out += nn::network_to_bytes(net);
  put(out, threshold);
  put(out, uint8_t(state));
  put(out, roc_auc);
  return out;
}

AssistantModel AssistantModel::from_bytes(const std::string& bytes,
                                          size_t* offset) {
  size_t off = offset ? *offset : 0;
  if (take<uint32_t>(bytes, off) != kAssistantMagic)
    throw std::runtime_error("assistant file: bad magic");
  if (take<uint32_t>(bytes, off) != 1)
    throw std::runtime_error("assistant file: unsupported version");
  AssistantModel model;
  model.net = nn::network_from_bytes(bytes, &off);
  model.threshold = take<double>(bytes, off);
  model.state = ModelState(take<uint8_t>(bytes, off));
  model.roc_auc = take<double>(bytes, off);
  if (offset) *offset = off;
  return model;
}

void SurrogateBundle::save(const std::string& path) const {
  std::string out;
  put(out, kBundleMagic);
  put(out, uint32_t(1));
  put(out, assistant_roc_auc);
  out += surrogate.to_bytes();
  out += assistant.to_bytes();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write bundle: " + path);
  f.write(out.data(), std::streamsize(out.size()));
}

SurrogateBundle SurrogateBundle::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open bundle: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  size_t off = 0;
  if (take<uint32_t>(bytes, off) != kBundleMagic)
    throw std::runtime_error("bundle file: bad magic");
  if (take<uint32_t>(bytes, off) != 1)
    throw std::runtime_error("bundle file: unsupported version");
  SurrogateBundle bundle;
  bundle.assistant_roc_auc = take<double>(bytes, off);
  bundle.surrogate = SurrogateModel::from_bytes(bytes, &off);
  bundle.assistant = AssistantModel::from_bytes(bytes, &off);
  return bundle;
}

}  // namespace breakwater
