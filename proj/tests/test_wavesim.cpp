#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "breakwater/csv.hpp"
#include "breakwater/domain.hpp"
#include "breakwater/rng.hpp"
#include "breakwater/wavesim.hpp"

using namespace breakwater;

namespace {

DomainConfig flat_deep_domain(int size, double wind_dir) {
  DomainConfig dom;
  dom.width = size;
  dom.height = size;
  dom.bathymetry = Grid<double>(size, size, 50.0);  // far from breaking
  dom.land_mask = Mask(size, size, 0);
  dom.prohibited_mask = Mask(size, size, 0);
  dom.targets = {{size / 2, size / 2}, {size / 4, size / 4}};
  dom.wind_direction = wind_dir;
  dom.wind_speed = 15.0;
  dom.finalize();
  return dom;
}

double total_energy(const WaveField& f) {
  double s = 0;
  for (float v : f.heights.cells) s += v;
  return s;
}

}  // namespace

TEST_CASE("open deep water carries the boundary height everywhere") {
  for (double dir : {0.0, 90.0, 180.0, 270.0, 45.0}) {
    const auto dom = flat_deep_domain(32, dir);
    const WaveField f = simulate({}, dom);
    const double h0 = 0.2 * dom.wind_speed;
    for (float v : f.heights.cells) REQUIRE(v == doctest::Approx(h0).epsilon(1e-4));
    for (double h : wave_height_at_targets(f, dom))
      CHECK(h == doctest::Approx(h0).epsilon(1e-4));
  }
}

TEST_CASE("a long breakwater directly upwind shades the target") {
  auto dom = flat_deep_domain(32, 0.0);  // waves travel from north to south
  dom.targets = {{16, 10}};
  dom.finalize();
  const double baseline =
      wave_height_at_targets(simulate({}, dom), dom)[0];
  BreakwaterSystem wall{{{{8.0, 20.0}, {24.0, 20.0}}}};
  const double shaded =
      wave_height_at_targets(simulate(wall, dom), dom)[0];
  CHECK(shaded < baseline);
  CHECK(shaded < 0.9 * baseline);
}

TEST_CASE("height saturates at gamma times depth") {
  auto dom = flat_deep_domain(16, 0.0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) dom.bathymetry.at(x, y) = 1.6;
  dom.finalize();
  const WaveField f = simulate({}, dom);
  for (float v : f.heights.cells) CHECK(v <= 0.5 * 1.6 + 1e-6);
}

TEST_CASE("simulate is bit-deterministic") {
  const auto dom = synthetic_case(32);
  BreakwaterSystem sys{{{{20.0, 20.0}, {26.0, 24.0}}}};
  const WaveField a = simulate(sys, dom);
  const WaveField b = simulate(sys, dom);
  REQUIRE(a.heights.cells == b.heights.cells);
}

TEST_CASE("heights are zero on land and structures, positive on open water") {
  const auto dom = synthetic_case(32);
  BreakwaterSystem sys{{{{20.0, 20.0}, {26.0, 24.0}}}};
  const WaveField f = simulate(sys, dom);
  const Mask candidate = rasterize(sys, dom.width, dom.height);
  size_t water_cells = 0, positive_cells = 0;
  for (int y = 0; y < dom.height; ++y) {
    for (int x = 0; x < dom.width; ++x) {
      if (dom.blocked_mask.at(x, y) || candidate.at(x, y)) {
        REQUIRE(f.heights.at(x, y) == 0.0f);
      } else {
        water_cells += 1;
        if (f.heights.at(x, y) > 0) positive_cells += 1;
      }
    }
  }
  CHECK(positive_cells > water_cells / 2);
}

TEST_CASE("synthetic no-defense baseline is strictly positive") {
  const auto dom = synthetic_case();
  const auto heights = wave_height_at_targets(simulate({}, dom), dom);
  REQUIRE(heights.size() == 2);
  for (double h : heights) CHECK(h > 0);
  CHECK(aggregate_target_heights(heights) ==
        doctest::Approx(heights[0] + heights[1]));
}

TEST_CASE("adding a segment never raises total wave energy (statistical)") {
  const auto dom = synthetic_case(32);
  Rng rng(5);
  int non_increasing = 0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    BreakwaterSystem sys;
    const int n = rng.uniform_int(0, 2);
    for (int b = 0; b < n; ++b) {
      Polyline line;
      for (int i = 0; i < 2; ++i)
        line.push_back({rng.uniform(8, 30), rng.uniform(8, 30)});
      if (line[0] == line[1]) line[1].x += 1.0;
      sys.breakwaters.push_back(line);
    }
    const double before = total_energy(simulate(sys, dom));
    BreakwaterSystem more = sys;
    Polyline extra;
    for (int i = 0; i < 2; ++i)
      extra.push_back({rng.uniform(8, 30), rng.uniform(8, 30)});
    if (extra[0] == extra[1]) extra[1].y += 1.0;
    more.breakwaters.push_back(extra);
    const double after = total_energy(simulate(more, dom));
    if (after <= before + 1e-9) non_increasing += 1;
  }
  CHECK(non_increasing >= trials * 95 / 100);
}

TEST_CASE("aggregation helpers") {
  CHECK(aggregate_target_heights({1.2, 0.8}) == doctest::Approx(2.0));
  CHECK(aggregate_target_heights({1.2, 0.8}, Aggregation::mean) ==
        doctest::Approx(1.0));
  CHECK(aggregate_target_heights({1.2, 0.8}, Aggregation::max) ==
        doctest::Approx(1.2));
  CHECK(aggregate_target_heights({0.0, 0.0}) == 0.0);
}

TEST_CASE("one simulate call on the desk grid stays under 50 ms") {
  const auto dom = synthetic_case();
  BreakwaterSystem sys{{{{30.0, 30.0}, {40.0, 40.0}}}};
  simulate(sys, dom);  // warm up
  std::vector<double> times;
  for (int i = 0; i < 7; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    simulate(sys, dom);
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  CHECK(times[times.size() / 2] <= 50.0);
}

// ---------------------------------------------------------------------------
// external adapter
// ---------------------------------------------------------------------------

namespace {

std::filesystem::path fresh_exchange_dir(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("external adapter: identity fixture round-trips") {
  const auto dom = synthetic_case(16);
  const auto dir = fresh_exchange_dir("bw_adapter_ok");
  // fixture: constant 0.25 everywhere; the adapter copies it to waves.txt
  std::ofstream fixture(dir / "fixture.txt");
  for (int y = 0; y < dom.height; ++y) {
    for (int x = 0; x < dom.width; ++x) fixture << "0.25 ";
    fixture << "\n";
  }
  fixture.close();
  ExternalAdapterConfig adapter{"cp fixture.txt waves.txt", dir.string(), 30};
  const WaveField f = external_simulate({}, dom, adapter);
  CHECK(f.provenance == Provenance::external_model);
  // water cells carry the fixture value, blocked cells are forced to zero
  CHECK(f.heights.at(dom.width - 1, dom.height - 1) == 0.25f);
  CHECK(f.heights.at(0, 0) == 0.0f);  // land corner
  CHECK(std::filesystem::exists(dir / "domain.txt"));
  CHECK(std::filesystem::exists(dir / "obstacles.txt"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("external adapter: nonzero exit carries code and stderr") {
  const auto dom = synthetic_case(16);
  const auto dir = fresh_exchange_dir("bw_adapter_fail");
  ExternalAdapterConfig adapter{"echo boom >&2; exit 3", dir.string(), 30};
  CHECK_THROWS_WITH_AS(external_simulate({}, dom, adapter),
                       doctest::Contains("code 3"), std::runtime_error);
  try {
    external_simulate({}, dom, adapter);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("external adapter: negative heights are a validation error") {
  const auto dom = synthetic_case(16);
  const auto dir = fresh_exchange_dir("bw_adapter_neg");
  std::ofstream fixture(dir / "fixture.txt");
  for (int i = 0; i < dom.width * dom.height; ++i) fixture << "-1 ";
  fixture.close();
  ExternalAdapterConfig adapter{"cp fixture.txt waves.txt", dir.string(), 30};
  CHECK_THROWS_WITH_AS(external_simulate({}, dom, adapter),
                       doctest::Contains("invalid wave height"),
                       std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("external adapter: dimension mismatch is rejected") {
  const auto dom = synthetic_case(16);
  const auto dir = fresh_exchange_dir("bw_adapter_dims");
  ExternalAdapterConfig adapter{"echo 1 2 3 > waves.txt", dir.string(), 30};
  CHECK_THROWS_WITH_AS(external_simulate({}, dom, adapter),
                       doctest::Contains("truncated"), std::runtime_error);
  std::filesystem::remove_all(dir);
}
