#include <doctest.h>

#include <filesystem>

#include "breakwater/rng.hpp"
#include "breakwater/surrogate.hpp"

using namespace breakwater;

namespace {

// Small deterministic dataset built from the real oracle at 16x16.
TrainingDataset small_dataset(const DomainConfig& dom, int count,
                              uint64_t seed) {
  TrainingDataset ds;
  ds.width = dom.width;
  ds.height = dom.height;
  ds.n_targets = int(dom.targets.size());
  ds.domain_text = domain_to_text(dom);
  Rng rng(seed);
  int made = 0;
  while (made < count) {
    BreakwaterSystem sys;
    Polyline line;
    for (int i = 0; i < 2; ++i)
      line.push_back({rng.uniform(1, dom.width - 1),
                      rng.uniform(1, dom.height - 1)});
    if (line[0] == line[1]) continue;
    sys.breakwaters.push_back(line);
    if (!check_constraints(sys, dom).feasible) continue;
    const WaveField field = simulate(sys, dom);
    const auto heights = wave_height_at_targets(field, dom);
    ds.add(sys, Rng::derive(seed, 0xabc, made), field, heights);
    made += 1;
  }
  return ds;
}

}  // namespace

TEST_CASE("encode: channels carry obstacles, noise, and scaled depth") {
  const auto dom = synthetic_case(16);
  const InputMask empty_mask = encode({}, dom, 7);
  const float* ch0 = empty_mask.data.plane(0, 0);
  const float* ch2 = empty_mask.data.plane(0, 2);
  for (int y = 0; y < dom.height; ++y)
    for (int x = 0; x < dom.width; ++x) {
      const size_t i = size_t(y) * dom.width + x;
      REQUIRE(ch0[i] == (dom.blocked_mask.at(x, y) ? 1.f : 0.f));
      REQUIRE(ch2[i] >= 0.f);
      REQUIRE(ch2[i] <= 1.f);
      REQUIRE((ch0[i] == 0.f || ch0[i] == 1.f));
    }

  // same system, same seed -> identical masks
  BreakwaterSystem sys{{{{8.0, 8.0}, {12.0, 10.0}}}};
  const InputMask a = encode(sys, dom, 42);
  const InputMask b = encode(sys, dom, 42);
  REQUIRE(a.data.v == b.data.v);
  // different seed changes only the noise channel
  const InputMask c = encode(sys, dom, 43);
  CHECK(a.data.v != c.data.v);
  const float* a0 = a.data.plane(0, 0);
  const float* c0 = c.data.plane(0, 0);
  for (int i = 0; i < dom.width * dom.height; ++i) REQUIRE(a0[i] == c0[i]);
}

TEST_CASE("encode: distinct one-segment systems give distinct obstacle "
          "channels") {
  const auto dom = synthetic_case(16);
  std::vector<BreakwaterSystem> systems;
  for (int x = 4; x <= 12; x += 2)
    for (int y = 8; y <= 14; y += 2) {
      BreakwaterSystem sys{{{{double(x), double(y)},
                             {double(x) + 2.5, double(y) + 1.0}}}};
      if (check_constraints(sys, dom).feasible) systems.push_back(sys);
    }
  REQUIRE(systems.size() >= 6);
  for (size_t i = 0; i < systems.size(); ++i)
    for (size_t j = i + 1; j < systems.size(); ++j) {
      const InputMask a = encode(systems[i], dom, 1);
      const InputMask b = encode(systems[j], dom, 1);
      std::vector<float> a0(a.data.plane(0, 0), a.data.plane(0, 0) + 256);
      std::vector<float> b0(b.data.plane(0, 0), b.data.plane(0, 0) + 256);
      REQUIRE(a0 != b0);
    }
}

TEST_CASE("dataset persistence round-trips exactly") {
  const auto dom = synthetic_case(16);
  const auto ds = small_dataset(dom, 3, 11);
  const auto path =
      std::filesystem::temp_directory_path() / "bw_dataset_rt.bwd";
  ds.save(path.string());
  const auto loaded = TrainingDataset::load(path.string());
  REQUIRE(loaded.records.size() == ds.records.size());
  CHECK(loaded.width == ds.width);
  CHECK(loaded.domain_text == ds.domain_text);
  for (size_t i = 0; i < ds.records.size(); ++i) {
    REQUIRE(loaded.records[i].genotype == ds.records[i].genotype);
    REQUIRE(loaded.records[i].mask_seed == ds.records[i].mask_seed);
    REQUIRE(loaded.records[i].field.cells == ds.records[i].field.cells);
    REQUIRE(loaded.records[i].target_heights == ds.records[i].target_heights);
  }
  std::filesystem::remove(path);
}

TEST_CASE("surrogate truth must come from a real oracle") {
  TrainingDataset ds;
  ds.width = 4;
  ds.height = 4;
  WaveField fake;
  fake.provenance = Provenance::surrogate;
  fake.heights = Grid<float>(4, 4, 0.f);
  CHECK_THROWS_AS(ds.add({}, 0, fake, {}), std::runtime_error);
}

TEST_CASE("metric closed forms") {
  // pred = true everywhere
  CHECK(metrics_from_pairs(std::vector<double>{1, 2},
                           std::vector<double>{1, 2})
            .mape == 0.0);
  // pred = true * 1.10 -> MAPE 10%
  const auto m = metrics_from_pairs(std::vector<double>{1.1, 2.2},
                                    std::vector<double>{1.0, 2.0});
  CHECK(m.mape == doctest::Approx(10.0));
  // true = [1, 2], pred = [1.1, 1.8] -> MAPE 10%, MAE 0.15
  const auto m2 = metrics_from_pairs(std::vector<double>{1.1, 1.8},
                                     std::vector<double>{1.0, 2.0});
  CHECK(m2.mape == doctest::Approx(10.0));
  CHECK(m2.mae == doctest::Approx(0.15));
  // near-zero truths only count toward MAE
  const auto m3 = metrics_from_pairs(std::vector<double>{0.5, 1.0},
                                     std::vector<double>{0.01, 1.0});
  CHECK(m3.evaluated_targets == 1);
}

TEST_CASE("training rejects undersized datasets") {
  const auto dom = synthetic_case(16);
  const auto ds = small_dataset(dom, 3, 21);
  auto model = make_surrogate(dom);
  SurrogateTrainOptions opts;  // default min_records = 50
  CHECK_THROWS_WITH_AS(train_surrogate(model, ds, dom, opts),
                       doctest::Contains("too small"), std::runtime_error);
}

TEST_CASE("overfit check: tiny dataset memorized within 200 epochs") {
  const auto dom = synthetic_case(16);
  const auto ds = small_dataset(dom, 10, 31);
  auto model = make_surrogate(dom);
  SurrogateTrainOptions opts;
  opts.epochs = 200;
  opts.min_records = 1;
  opts.train_fraction = 1.0;  // memorize everything
  opts.seed = 5;
  const auto report = train_surrogate(model, ds, dom, opts);
  double mean_h = 0;
  size_t n = 0;
  for (const auto& rec : ds.records)
    for (double h : rec.target_heights) {
      mean_h += h;
      n += 1;
    }
  mean_h /= double(n);
  CHECK(report.train_mae < 0.01 * mean_h);
}

TEST_CASE("training: loss trend, readiness, reproducibility, prediction "
          "ranges") {
  const auto dom = synthetic_case(16);
  const auto ds = small_dataset(dom, 60, 41);
  auto train_once = [&]() {
    auto model = make_surrogate(dom);
    SurrogateTrainOptions opts;
    opts.epochs = 25;
    opts.seed = 8;
    const auto report = train_surrogate(model, ds, dom, opts);
    return std::make_pair(std::move(model), report);
  };
  auto [model, report] = train_once();

  // train loss non-increasing over 5-epoch window medians
  std::vector<double> medians;
  for (size_t s = 0; s + 5 <= report.epoch_losses.size(); s += 5) {
    std::vector<double> w(report.epoch_losses.begin() + s,
                          report.epoch_losses.begin() + s + 5);
    std::sort(w.begin(), w.end());
    medians.push_back(w[2]);
  }
  for (size_t i = 1; i < medians.size(); ++i)
    CHECK(medians[i] <= medians[i - 1] + 1e-9);

  // split respected
  CHECK(report.train_indices.size() == 48);
  CHECK(report.test_indices.size() == 12);

  // seeded reproducibility: identical final metrics
  auto [model2, report2] = train_once();
  CHECK(report2.test_mape == report.test_mape);
  CHECK(report2.test_mae == report.test_mae);
  REQUIRE(model2.net.weights[0].v == model.net.weights[0].v);

  // prediction: field values stay inside the bin range, targets clamped >= 0
  const auto& rec = ds.records[0];
  const auto pred = predict_unchecked(model, encode(rec.genotype, dom,
                                                    rec.mask_seed), dom);
  for (float v : pred.field.heights.cells) {
    REQUIRE(v >= float(model.bin_edges.front()));
    REQUIRE(v <= float(model.bin_edges.back()));
  }
  CHECK(pred.field.provenance == Provenance::surrogate);
  for (double h : pred.target_heights) REQUIRE(h >= 0.0);

  // bin edges: strictly increasing, spanning [0, 1.1 * max observed]
  for (size_t k = 1; k < model.bin_edges.size(); ++k)
    REQUIRE(model.bin_edges[k] > model.bin_edges[k - 1]);
  CHECK(model.bin_edges.front() == 0.0);

  // predict on an untrained model is an error
  auto fresh = make_surrogate(dom);
  CHECK_THROWS_AS(predict(fresh, encode(rec.genotype, dom, 1), dom),
                  std::runtime_error);

  // model persistence round-trip
  const auto bytes = model.to_bytes();
  const auto restored = SurrogateModel::from_bytes(bytes, nullptr);
  REQUIRE(restored.net.weights[0].v == model.net.weights[0].v);
  CHECK(restored.bin_edges == model.bin_edges);
  CHECK(restored.head2_scale == model.head2_scale);
  CHECK(restored.state == model.state);
}
