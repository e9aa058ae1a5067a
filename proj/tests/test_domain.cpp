#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "breakwater/domain.hpp"

using namespace breakwater;

TEST_CASE("minimal all-water config validates") {
  DomainConfig dom;
  dom.width = 8;
  dom.height = 8;
  dom.bathymetry = Grid<double>(8, 8, 3.0);
  dom.land_mask = Mask(8, 8, 0);
  dom.prohibited_mask = Mask(8, 8, 0);
  dom.targets = {{4, 4}};
  REQUIRE_NOTHROW(dom.finalize());
  CHECK(dom.protection_mask.at(4, 4) == 1);
  CHECK(dom.protection_mask.at(4, 6) == 1);   // within radius 2
  CHECK(dom.protection_mask.at(4, 7) == 0);   // outside radius 2
}

TEST_CASE("target on land is rejected with a descriptive error") {
  DomainConfig dom;
  dom.width = 8;
  dom.height = 8;
  dom.bathymetry = Grid<double>(8, 8, 3.0);
  dom.land_mask = Mask(8, 8, 0);
  dom.land_mask.at(2, 2) = 1;
  dom.bathymetry.at(2, 2) = 0.0;
  dom.prohibited_mask = Mask(8, 8, 0);
  dom.targets = {{2, 2}};
  CHECK_THROWS_WITH_AS(dom.finalize(),
                       doctest::Contains("target 0 lies on a land cell"),
                       std::runtime_error);
}

TEST_CASE("dimension mismatch is rejected") {
  DomainConfig dom;
  dom.width = 8;
  dom.height = 8;
  dom.bathymetry = Grid<double>(8, 7, 3.0);
  dom.land_mask = Mask(8, 8, 0);
  dom.prohibited_mask = Mask(8, 8, 0);
  CHECK_THROWS_AS(dom.finalize(), std::runtime_error);
}

TEST_CASE("synthetic case matches the documented scenario") {
  const DomainConfig dom = synthetic_case();
  CHECK(dom.width == 64);
  CHECK(dom.height == 64);
  CHECK(dom.targets.size() == 2);
  CHECK(dom.static_structures.size() == 2);
  // depth grows from the lower-left corner to the upper-right
  CHECK(dom.bathymetry.at(0, 0) < dom.bathymetry.at(63, 63));
  CHECK(dom.land_mask.at(0, 0) == 1);
  CHECK(dom.land_mask.at(63, 63) == 0);
  CHECK(mask_count(dom.prohibited_mask) > 0);
  // deterministic across calls
  const DomainConfig again = synthetic_case();
  CHECK(dom == again);
  // scales to other resolutions
  const DomainConfig small = synthetic_case(32);
  CHECK(small.targets.size() == 2);
  CHECK(small.static_structures.size() == 2);
}

TEST_CASE("save/load round-trips exactly") {
  const DomainConfig dom = synthetic_case(32);
  const auto path = std::filesystem::temp_directory_path() / "bw_dom_rt.txt";
  save_domain(dom, path.string());
  const DomainConfig loaded = load_domain(path.string());
  CHECK(loaded == dom);
  std::filesystem::remove(path);
}

TEST_CASE("malformed domain text is a parse error") {
  CHECK_THROWS_AS(domain_from_text("not a domain"), std::runtime_error);
  CHECK_THROWS_AS(domain_from_text("breakwater_domain 1\nwidth oops"),
                  std::runtime_error);
}
