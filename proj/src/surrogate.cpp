#include "breakwater/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "breakwater/rng.hpp"

namespace breakwater {

namespace {

using nn::Tensor4;

constexpr double kMapeTruthFloor = 0.05;

double max_depth_of(const DomainConfig& dom) {
  double mx = 0;
  for (double d : dom.bathymetry.cells) mx = std::max(mx, d);
  return mx;
}

// exp approximation for the per-pixel softmax expectation: 2^i scaling plus
// a quintic for the fraction, relative error ~1e-6, branch-free per lane.
inline float fast_exp(float x) {
  x = std::max(-80.f, std::min(80.f, x));
  const float t = x * 1.4426950408889634f;  // x / ln 2
  const float fi = std::floor(t);
  const float f = t - fi;
  const float p =
      1.f +
      f * (0.693147182f +
           f * (0.240226507f +
                f * (0.0555041086f + f * (0.00961812910f + f * 0.00133335581f))));
  const int32_t bits = (int32_t(fi) + 127) << 23;
  float scale;
  static_assert(sizeof(scale) == sizeof(bits));
  std::memcpy(&scale, &bits, sizeof(scale));
  return p * scale;
}

}  // namespace

InputMask encode(const BreakwaterSystem& sys, const DomainConfig& dom,
                 uint64_t seed) {
  InputMask mask;
  mask.seed = seed;
  mask.data = Tensor4<float>(1, 3, dom.height, dom.width);
  const Mask candidate = rasterize(sys, dom.width, dom.height);

  float* ch0 = mask.data.plane(0, 0);
  float* ch1 = mask.data.plane(0, 1);
  float* ch2 = mask.data.plane(0, 2);
  const double depth_scale = max_depth_of(dom);
  Rng rng(Rng::derive(seed, 0x6d61736bULL));
  for (int y = 0; y < dom.height; ++y) {
    for (int x = 0; x < dom.width; ++x) {
      const size_t i = size_t(y) * dom.width + x;
      ch0[i] = (candidate.at(x, y) || dom.blocked_mask.at(x, y)) ? 1.f : 0.f;
      ch1[i] = float(rng.normal());
      ch2[i] = depth_scale > 0
                   ? float(dom.bathymetry.at(x, y) / depth_scale)
                   : 0.f;
    }
  }
  return mask;
}

void TrainingDataset::add(const BreakwaterSystem& sys, uint64_t mask_seed,
                          const WaveField& truth,
                          const std::vector<double>& heights) {
  if (truth.provenance == Provenance::surrogate)
    throw std::runtime_error(
        "training dataset: surrogate output is not admissible truth");
  TrainingRecord rec;
  rec.genotype = sys;
  rec.mask_seed = mask_seed;
  rec.field = truth.heights;
  rec.target_heights = heights;
  records.push_back(std::move(rec));
}

// ---------------------------------------------------------------------------
// model construction
// ---------------------------------------------------------------------------

SurrogateModel make_surrogate(const DomainConfig& dom, int bins) {
  if (dom.width % 8 || dom.height % 8)
    throw std::runtime_error(
        "surrogate: grid dimensions must be divisible by 8");
  using L = nn::LayerSpec;
  nn::NetworkSpec spec;
  spec.in_channels = 3;
  spec.in_h = dom.height;
  spec.in_w = dom.width;
  spec.layers = {
      L::conv3(3, 6, nn::Act::relu),      // 0: full res        (skip A)
      L::maxpool(),                       // 1
      L::conv3(6, 12, nn::Act::relu),     // 2: 1/2 res         (skip B)
      L::maxpool(),                       // 3
      L::conv3(12, 24, nn::Act::relu),    // 4: 1/4 res         (skip C)
      L::maxpool(),                       // 5
      L::conv3(24, 32, nn::Act::relu),    // 6: 1/8 res bottleneck
      L::upsample(),                      // 7
      L::skip(4),                         // 8: 32+24
      L::conv3(56, 10, nn::Act::relu),    // 9
      L::upsample(),                      // 10
      L::skip(2),                         // 11: 10+12
      L::conv3(22, 8, nn::Act::relu),     // 12
      L::upsample(),                      // 13
      L::skip(0),                         // 14: 8+6
      L::conv1(14, 12, nn::Act::relu),    // 15: cheap full-res mixing
      L::conv1(12, bins, nn::Act::none),  // 16: per-pixel bin logits
  };
  SurrogateModel model;
  model.net = nn::Network<float>(spec);
  model.bin_edges.assign(size_t(bins) + 1, 0.0);
  model.head2_scale.assign(dom.targets.size(), 1.0);
  model.head2_offset.assign(dom.targets.size(), 0.0);
  return model;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

namespace {

int bin_of(double h, const std::vector<double>& edges) {
  const int K = int(edges.size()) - 1;
  if (h <= edges.front()) return 0;
  if (h >= edges.back()) return K - 1;
  const double width = (edges.back() - edges.front()) / K;
  int k = int((h - edges.front()) / width);
  return std::clamp(k, 0, K - 1);
}

struct TargetGather {
  // expected height and softmax probabilities at each target pixel
  std::vector<double> expected;              // per target
  std::vector<std::vector<double>> probs;    // per target, per bin
};

TargetGather gather_targets(const SurrogateModel& model,
                            const Tensor4<float>& logits, int sample,
                            const DomainConfig& dom) {
  const int K = model.bins();
  const int HW = logits.h * logits.w;
  TargetGather g;
  g.expected.resize(dom.targets.size());
  g.probs.assign(dom.targets.size(), std::vector<double>(K));
  const float* base = logits.plane(sample, 0);
  for (size_t t = 0; t < dom.targets.size(); ++t) {
    const int p = dom.targets[t].y * logits.w + dom.targets[t].x;
    double mx = -1e300;
    for (int k = 0; k < K; ++k)
      mx = std::max(mx, double(base[size_t(k) * HW + p]));
    double z = 0;
    for (int k = 0; k < K; ++k) {
      g.probs[t][k] = std::exp(double(base[size_t(k) * HW + p]) - mx);
      z += g.probs[t][k];
    }
    double e = 0;
    for (int k = 0; k < K; ++k) {
      g.probs[t][k] /= z;
      e += g.probs[t][k] * model.bin_center(k);
    }
    g.expected[t] = e;
  }
  return g;
}

}  // namespace

SurrogateTrainReport train_surrogate(SurrogateModel& model,
                                     const TrainingDataset& dataset,
                                     const DomainConfig& dom,
                                     const SurrogateTrainOptions& opts) {
  if (dataset.records.size() < std::max<size_t>(2, opts.min_records))
    throw std::runtime_error("surrogate train: dataset too small (" +
                             std::to_string(dataset.records.size()) + " < " +
                             std::to_string(opts.min_records) + ")");
  if (dataset.width != dom.width || dataset.height != dom.height)
    throw std::runtime_error("surrogate train: dataset/domain size mismatch");

  SurrogateTrainReport report;
  model.state = ModelState::training;

  // deterministic shuffled split
  std::vector<size_t> order(dataset.records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(Rng::derive(opts.seed, 0x73706c69ULL));
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[split_rng.uniform_int(0, int(i) - 1)]);
  const size_t n_train =
      std::max<size_t>(1, size_t(std::floor(double(order.size()) *
                                            opts.train_fraction)));
  report.train_indices.assign(order.begin(), order.begin() + n_train);
  report.test_indices.assign(order.begin() + n_train, order.end());

  // bin edges from the training split's observed height range
  double max_h = 0;
  for (size_t i : report.train_indices)
    for (float v : dataset.records[i].field.cells)
      max_h = std::max(max_h, double(v));
  if (max_h <= 0) max_h = 1.0;
  const int K = model.bins();
  for (int k = 0; k <= K; ++k)
    model.bin_edges[k] = max_h * 1.1 * double(k) / double(K);

  model.net.init_params(Rng::derive(opts.seed, 0x696e6974ULL));
  for (auto& s : model.head2_scale) s = 1.0;
  for (auto& o : model.head2_offset) o = 0.0;

  auto adam = nn::make_adam_state(model.net);
  // separate tiny ADAM for the affine head parameters
  const size_t n_affine = model.head2_scale.size() * 2;
  std::vector<double> aff_m(n_affine, 0.0), aff_v(n_affine, 0.0);
  long aff_t = 0;

  // precomputed class maps and cross-entropy pixel weights (0 on land)
  const int HW = dom.width * dom.height;
  std::vector<float> land_weight(HW);
  for (int y = 0; y < dom.height; ++y)
    for (int x = 0; x < dom.width; ++x)
      land_weight[size_t(y) * dom.width + x] =
          dom.land_mask.at(x, y) ? 0.f : 1.f;

  const size_t n_targets = dom.targets.size();
  Rng epoch_rng(Rng::derive(opts.seed, 0x65706f63ULL));
  std::vector<size_t> perm = report.train_indices;
  typename nn::Network<float>::Tape tape;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const double lr =
        nn::lr_schedule(epoch, opts.lr_base, opts.lr_factor, opts.lr_every);
    for (size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[epoch_rng.uniform_int(0, int(i) - 1)]);

    double epoch_loss = 0;
    size_t n_batches = 0;
    for (size_t start = 0; start < perm.size(); start += size_t(opts.batch)) {
      const size_t bsz = std::min(size_t(opts.batch), perm.size() - start);
      Tensor4<float> batch(int(bsz), 3, dom.height, dom.width);
      std::vector<int32_t> classes(bsz * size_t(HW));
      std::vector<float> weights(bsz * size_t(HW));
      for (size_t b = 0; b < bsz; ++b) {
        const auto& rec = dataset.records[perm[start + b]];
        // fresh noise every epoch so the noise channel cannot act as a
        // record fingerprint
        const uint64_t noise_seed = Rng::derive(
            opts.seed, 0x6e6f6973ULL,
            uint64_t(perm[start + b]) * 100003ULL + uint64_t(epoch));
        const InputMask m = encode(rec.genotype, dom, noise_seed);
        std::copy_n(m.data.v.data(), m.data.size(),
                    batch.v.data() + b * size_t(3) * HW);
        for (int p = 0; p < HW; ++p) {
          classes[b * HW + p] =
              int32_t(bin_of(double(rec.field.cells[p]), model.bin_edges));
          weights[b * HW + p] = land_weight[p];
        }
      }

      const Tensor4<float>& logits = model.net.forward(batch, tape);

      Tensor4<float> dlogits;
      const double ce = nn::pixel_cross_entropy(logits, classes, weights,
                                                &dlogits);

      // head 2: affine over gathered expected heights
      std::vector<double> preds(bsz * n_targets), truth(bsz * n_targets),
          mae_w(bsz * n_targets, 1.0);
      std::vector<TargetGather> gathers(bsz);
      for (size_t b = 0; b < bsz; ++b) {
        gathers[b] = gather_targets(model, logits, int(b), dom);
        const auto& rec = dataset.records[perm[start + b]];
        for (size_t t = 0; t < n_targets; ++t) {
          preds[b * n_targets + t] = model.head2_scale[t] *
                                         gathers[b].expected[t] +
                                     model.head2_offset[t];
          truth[b * n_targets + t] = rec.target_heights[t];
        }
      }
      const auto mae = nn::weighted_mae(preds, truth, mae_w, true);

      // fold the MAE gradient through the affine and the softmax expectation
      std::vector<double> dscale(n_targets, 0.0), doffset(n_targets, 0.0);
      for (size_t b = 0; b < bsz; ++b) {
        float* dbase = dlogits.plane(int(b), 0);
        for (size_t t = 0; t < n_targets; ++t) {
          const double dpred = opts.lambda2 * mae.dpred[b * n_targets + t];
          dscale[t] += dpred * gathers[b].expected[t];
          doffset[t] += dpred;
          const double de = dpred * model.head2_scale[t];
          const int p = dom.targets[t].y * dom.width + dom.targets[t].x;
          for (int k = 0; k < K; ++k) {
            const double soft = gathers[b].probs[t][k];
            dbase[size_t(k) * HW + p] += float(
                de * soft * (model.bin_center(k) - gathers[b].expected[t]));
          }
        }
      }
      if (opts.lambda1 != 1.0)
        for (auto& v : dlogits.v) v = float(v * opts.lambda1);

      auto grads = model.net.backward(tape, dlogits);
      nn::adam_step(model.net, grads, adam, lr);

      // affine ADAM step
      aff_t += 1;
      const double bc1 = 1.0 - std::pow(0.9, double(aff_t));
      const double bc2 = 1.0 - std::pow(0.999, double(aff_t));
      auto aff_update = [&](double& p, size_t slot, double grad) {
        aff_m[slot] = 0.9 * aff_m[slot] + 0.1 * grad;
        aff_v[slot] = 0.999 * aff_v[slot] + 0.001 * grad * grad;
        p -= lr * (aff_m[slot] / bc1) /
             (std::sqrt(aff_v[slot] / bc2) + 1e-8);
      };
      for (size_t t = 0; t < n_targets; ++t) {
        aff_update(model.head2_scale[t], 2 * t, dscale[t]);
        aff_update(model.head2_offset[t], 2 * t + 1, doffset[t]);
      }

      epoch_loss += opts.lambda1 * ce + opts.lambda2 * mae.loss;
      n_batches += 1;
    }
    report.epoch_losses.push_back(epoch_loss / double(n_batches));
  }

  const auto train_m =
      surrogate_metrics(model, dataset, dom, report.train_indices);
  report.train_mae = train_m.mae;
  if (!report.test_indices.empty()) {
    const auto test_m =
        surrogate_metrics(model, dataset, dom, report.test_indices);
    report.test_mape = test_m.mape;
    report.test_mae = test_m.mae;
    report.over_fraction = test_m.over_fraction;
    report.under_fraction = test_m.under_fraction;
    model.test_mape = test_m.mape;
    model.test_mae = test_m.mae;
    model.state = test_m.mape <= opts.readiness_mape ? ModelState::ready
                                                     : ModelState::training;
  } else {
    model.state = ModelState::training;
  }
  return report;
}

// ---------------------------------------------------------------------------
// prediction
// ---------------------------------------------------------------------------

SurrogatePrediction predict_unchecked(const SurrogateModel& model,
                                      const InputMask& mask,
                                      const DomainConfig& dom) {
  SurrogatePrediction out;
  thread_local nn::Network<float>::Tape tape;  // reused across calls
  const Tensor4<float>& logits = model.net.forward(mask.data, tape);
  const int K = model.bins();
  const int HW = dom.width * dom.height;

  out.field.provenance = Provenance::surrogate;
  out.field.heights = Grid<float>(dom.width, dom.height, 0.f);
  const float* const base = logits.plane(0, 0);
  const float* const ch0 = mask.data.plane(0, 0);

  // channel-major passes keep the memory walk sequential
  thread_local std::vector<float> mx, zsum, esum;
  mx.assign(HW, 0.f);
  zsum.assign(HW, 0.f);
  esum.assign(HW, 0.f);
  std::copy_n(base, HW, mx.data());
  for (int k = 1; k < K; ++k) {
    const float* __restrict row = base + size_t(k) * HW;
    for (int p = 0; p < HW; ++p) mx[p] = std::max(mx[p], row[p]);
  }
  for (int k = 0; k < K; ++k) {
    const float* __restrict row = base + size_t(k) * HW;
    const float center = float(model.bin_center(k));
    for (int p = 0; p < HW; ++p) {
      const float q = fast_exp(row[p] - mx[p]);
      zsum[p] += q;
      esum[p] += q * center;
    }
  }
  for (int p = 0; p < HW; ++p)
    out.field.heights.cells[p] = ch0[p] >= 0.5f ? 0.f : esum[p] / zsum[p];

  out.target_heights.resize(dom.targets.size());
  const auto g = gather_targets(model, logits, 0, dom);
  for (size_t t = 0; t < dom.targets.size(); ++t) {
    const double v =
        model.head2_scale[t] * g.expected[t] + model.head2_offset[t];
    out.target_heights[t] = std::max(0.0, v);
  }
  return out;
}

SurrogatePrediction predict(const SurrogateModel& model, const InputMask& mask,
                            const DomainConfig& dom) {
  if (model.state != ModelState::ready)
    throw std::runtime_error("surrogate predict: model is not ready");
  return predict_unchecked(model, mask, dom);
}

SurrogateMetrics metrics_from_pairs(std::span<const double> pred,
                                    std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw std::runtime_error("metrics_from_pairs: size mismatch");
  SurrogateMetrics m;
  double mape_acc = 0, mae_acc = 0;
  size_t mape_n = 0, over = 0, under = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double p = pred[i], tr = truth[i];
    mae_acc += std::abs(p - tr);
    if (p > tr) over += 1;
    if (p < tr) under += 1;
    if (tr > kMapeTruthFloor) {
      mape_acc += std::abs(p - tr) / tr;
      mape_n += 1;
    }
  }
  const size_t n = pred.size();
  m.mape = mape_n ? 100.0 * mape_acc / double(mape_n) : 0.0;
  m.mae = n ? mae_acc / double(n) : 0.0;
  m.over_fraction = n ? double(over) / double(n) : 0.0;
  m.under_fraction = n ? double(under) / double(n) : 0.0;
  m.evaluated_targets = mape_n;
  return m;
}

SurrogateMetrics surrogate_metrics(const SurrogateModel& model,
                                   const TrainingDataset& dataset,
                                   const DomainConfig& dom,
                                   std::span<const size_t> indices) {
  if (indices.empty())
    throw std::runtime_error("surrogate_metrics: empty split");
  std::vector<double> preds, truths;
  for (size_t idx : indices) {
    const auto& rec = dataset.records[idx];
    const InputMask mask = encode(rec.genotype, dom, rec.mask_seed);
    const auto pred = predict_unchecked(model, mask, dom);
    for (size_t t = 0; t < rec.target_heights.size(); ++t) {
      preds.push_back(pred.target_heights[t]);
      truths.push_back(rec.target_heights[t]);
    }
  }
  return metrics_from_pairs(preds, truths);
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
    throw std::runtime_error("surrogate file: truncated");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

constexpr uint32_t kDatasetMagic = 0x53445742;  // "BWDS"
constexpr uint32_t kModelMagic = 0x4d535742;    // "BWSM"

}  // namespace

void TrainingDataset::save(const std::string& path) const {
  std::string out;
  put(out, kDatasetMagic);
  put(out, uint32_t(1));
  put(out, int32_t(width));
  put(out, int32_t(height));
  put(out, int32_t(n_targets));
  put(out, uint64_t(domain_text.size()));
  out += domain_text;
  put(out, uint64_t(records.size()));
  for (const auto& rec : records) {
    put(out, rec.mask_seed);
    put(out, uint32_t(rec.genotype.breakwaters.size()));
    for (const auto& line : rec.genotype.breakwaters) {
      put(out, uint32_t(line.size()));
      for (const auto& p : line) {
        put(out, p.x);
        put(out, p.y);
      }
    }
    out.append(reinterpret_cast<const char*>(rec.field.cells.data()),
               rec.field.cells.size() * sizeof(float));
    put(out, uint32_t(rec.target_heights.size()));
    for (double h : rec.target_heights) put(out, h);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write dataset: " + path);
  f.write(out.data(), std::streamsize(out.size()));
}

TrainingDataset TrainingDataset::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open dataset: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  size_t off = 0;
  if (take<uint32_t>(bytes, off) != kDatasetMagic)
    throw std::runtime_error("dataset file: bad magic");
  if (take<uint32_t>(bytes, off) != 1)
    throw std::runtime_error("dataset file: unsupported version");
  TrainingDataset ds;
  ds.width = take<int32_t>(bytes, off);
  ds.height = take<int32_t>(bytes, off);
  ds.n_targets = take<int32_t>(bytes, off);
  const uint64_t dlen = take<uint64_t>(bytes, off);
  if (off + dlen > bytes.size())
    throw std::runtime_error("dataset file: truncated domain text");
  ds.domain_text = bytes.substr(off, dlen);
  off += dlen;
  const uint64_t n = take<uint64_t>(bytes, off);
  for (uint64_t i = 0; i < n; ++i) {
    TrainingRecord rec;
    rec.mask_seed = take<uint64_t>(bytes, off);
    const uint32_t n_lines = take<uint32_t>(bytes, off);
    for (uint32_t li = 0; li < n_lines; ++li) {
      const uint32_t n_nodes = take<uint32_t>(bytes, off);
      Polyline line;
      for (uint32_t k = 0; k < n_nodes; ++k) {
        Point p;
        p.x = take<double>(bytes, off);
        p.y = take<double>(bytes, off);
        line.push_back(p);
      }
      rec.genotype.breakwaters.push_back(std::move(line));
    }
    rec.field = Grid<float>(ds.width, ds.height, 0.f);
    const size_t fbytes = rec.field.cells.size() * sizeof(float);
    if (off + fbytes > bytes.size())
      throw std::runtime_error("dataset file: truncated field");
    std::memcpy(rec.field.cells.data(), bytes.data() + off, fbytes);
    off += fbytes;
    const uint32_t nt = take<uint32_t>(bytes, off);
    for (uint32_t t = 0; t < nt; ++t)
      rec.target_heights.push_back(take<double>(bytes, off));
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

std::string SurrogateModel::to_bytes() const {
  std::string out;
  put(out, kModelMagic);
  put(out, uint32_t(1));
  out += nn::network_to_bytes(net);
  put(out, uint32_t(bin_edges.size()));
  for (double e : bin_edges) put(out, e);
  put(out, uint32_t(head2_scale.size()));
  for (size_t t = 0; t < head2_scale.size(); ++t) {
    put(out, head2_scale[t]);
    put(out, head2_offset[t]);
  }
  put(out, uint8_t(state));
  put(out, test_mape);
  put(out, test_mae);
  return out;
}

SurrogateModel SurrogateModel::from_bytes(const std::string& bytes,
                                          size_t* offset) {
  size_t off = offset ? *offset : 0;
  if (take<uint32_t>(bytes, off) != kModelMagic)
    throw std::runtime_error("surrogate file: bad magic");
  if (take<uint32_t>(bytes, off) != 1)
    throw std::runtime_error("surrogate file: unsupported version");
  SurrogateModel model;
  model.net = nn::network_from_bytes(bytes, &off);
  const uint32_t ne = take<uint32_t>(bytes, off);
  model.bin_edges.resize(ne);
  for (auto& e : model.bin_edges) e = take<double>(bytes, off);
  const uint32_t nt = take<uint32_t>(bytes, off);
  model.head2_scale.resize(nt);
  model.head2_offset.resize(nt);
  for (uint32_t t = 0; t < nt; ++t) {
    model.head2_scale[t] = take<double>(bytes, off);
    model.head2_offset[t] = take<double>(bytes, off);
  }
  model.state = ModelState(take<uint8_t>(bytes, off));
  model.test_mape = take<double>(bytes, off);
  model.test_mae = take<double>(bytes, off);
  if (offset) *offset = off;
  return model;
}

}  // namespace breakwater
