#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "absf/anatomy.hpp"
#include "absf/error.hpp"
#include "support.hpp"

using namespace absf;
using absf::test::uniform;

namespace {

VertebraModel square_model() {
  VertebraModel m;
  m.axial_section = {{0, 0}, {10, 0}, {10, 10}, {0, 10}};
  m.height = 4.0;
  m.corridors = {{"left", {-5, 5, 0}, Vec3::UnitX(), 1.0, 5.0}};
  return m;
}

BmdGrid linear_grid() {
  return BmdGrid::from_function({-10, -10, -10}, {2.0, 2.5, 5.0}, {11, 9, 5}, [](const Vec3& p) {
    return 5.0 + 0.1 * p.x() - 0.2 * p.y() + 0.05 * p.z();
  });
}

}  // namespace

TEST_CASE("square section distances and queries") {
  const VertebraModel m = square_model();
  CHECK_NOTHROW(m.validate());
  CHECK(m.area() == doctest::Approx(100.0));
  CHECK((m.centroid() - Vec2(5, 5)).norm() < 1e-12);
  CHECK(m.section_signed_distance({5, 5}) == doctest::Approx(5.0));
  CHECK(m.section_signed_distance({1, 5}) == doctest::Approx(1.0));
  CHECK(m.section_signed_distance({-2, 5}) == doctest::Approx(-2.0));
  CHECK(m.section_contains({9.9, 9.9}));
  CHECK_FALSE(m.section_contains({10.1, 5}));
}

TEST_CASE("containment honours height, inflation and corridors") {
  const VertebraModel m = square_model();
  CHECK(contains(m, {5, 5, 0}, 0.0));
  CHECK(contains(m, {5, 5, 1.9}, 0.0));
  CHECK_FALSE(contains(m, {5, 5, 2.1}, 0.0));
  CHECK(contains(m, {5, 5, 0}, 1.9));
  CHECK_FALSE(contains(m, {5, 5, 0}, 2.1));
  // Inside the corridor capsule but outside the body.
  CHECK(contains(m, {-3, 5, 0}, 0.5));
  CHECK_FALSE(contains(m, {-3, 6.8, 0}, 0.5));
  CHECK_THROWS_AS(contains(m, {5, 5, 0}, -0.1), InvalidArgument);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p{uniform(rng, -8, 12), uniform(rng, -2, 12), uniform(rng, -3, 3)};
    const double inflate = uniform(rng, 0, 1.5);
    CHECK(contains(m, p, inflate) == (m.containment_margin(p, inflate) >= 0.0));
  }
}

TEST_CASE("invalid sections are rejected") {
  VertebraModel m = square_model();
  m.axial_section = {{0, 0}, {0, 10}, {10, 10}, {10, 0}};
  CHECK_THROWS_AS(m.validate(), InvalidModel);
  m.axial_section = {{0, 0}, {10, 10}, {10, 0}, {0, 10}};
  CHECK_THROWS_AS(m.validate(), InvalidModel);
  m.axial_section = {{0, 0}, {10, 0}};
  CHECK_THROWS_AS(m.validate(), InvalidModel);
  m.axial_section = {{0, 0}, {5, 0}, {10, 0}};
  CHECK_THROWS_AS(m.validate(), InvalidModel);
  m = square_model();
  m.height = 0.0;
  CHECK_THROWS_AS(m.validate(), InvalidModel);
  m = square_model();
  m.corridors[0].axis = {1, 1, 0};
  CHECK_THROWS_AS(m.validate(), InvalidModel);
}

TEST_CASE("mirroring swaps sides and preserves containment") {
  VertebraModel m = square_model();
  m.corridors.push_back({"right", {15, 5, 0}, -Vec3::UnitX(), 1.0, 5.0});
  const VertebraModel w = m.mirrored();
  CHECK_NOTHROW(w.validate());
  CHECK(w.corridors[w.corridor_index("right")].entry.x() == doctest::Approx(5.0));
  CHECK(w.corridors[w.corridor_index("left")].entry.x() == doctest::Approx(-15.0));
  std::mt19937_64 rng(4);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p{uniform(rng, -8, 18), uniform(rng, -2, 12), uniform(rng, -3, 3)};
    const Vec3 q{-p.x(), p.y(), p.z()};
    CHECK(m.containment_margin(p, 0.3) == doctest::Approx(w.containment_margin(q, 0.3)));
  }
  CHECK_THROWS_AS(m.corridor_index("middle"), InvalidModel);
}

TEST_CASE("scaling about the origin") {
  const VertebraModel m = square_model().scaled(1.5);
  CHECK(m.area() == doctest::Approx(225.0));
  CHECK(m.height == doctest::Approx(6.0));
  CHECK(m.corridors[0].radius == doctest::Approx(1.5));
  CHECK_THROWS_AS(square_model().scaled(0.0), InvalidArgument);
}

TEST_CASE("trilinear interpolation reproduces linear fields") {
  const BmdGrid g = linear_grid();
  CHECK_NOTHROW(g.validate());
  CHECK(g.index(1, 0, 0) == 1);
  CHECK(g.index(0, 1, 0) == 11);
  CHECK(g.index(0, 0, 1) == 99);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p{uniform(rng, -10, 10), uniform(rng, -10, 10), uniform(rng, -10, 10)};
    const double expect = 5.0 + 0.1 * p.x() - 0.2 * p.y() + 0.05 * p.z();
    REQUIRE(bmd_at(g, p) == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(bmd_at(g, g.upper()) == doctest::Approx(5.0 + 1.0 - 2.0 + 0.5));
  CHECK_THROWS_AS(bmd_at(g, {10.1, 0, 0}), OutOfField);
  CHECK_THROWS_AS(bmd_at(g, {0, 0, -10.5}), OutOfField);
}

TEST_CASE("grid validation") {
  BmdGrid g = linear_grid();
  g.values.pop_back();
  CHECK_THROWS_AS(g.validate(), InvalidModel);
  g = linear_grid();
  g.values[3] = -1.0;
  CHECK_THROWS_AS(g.validate(), InvalidModel);
  g = linear_grid();
  g.spacing.y() = 0.0;
  CHECK_THROWS_AS(g.validate(), InvalidModel);
}

TEST_CASE("path profiles") {
  const BmdGrid g = linear_grid();
  const Polyline line = {{-5, 0, 0}, {5, 0, 0}};
  const BmdProfile prof = path_bmd_profile(g, line, 0.5);
  CHECK(prof.samples.size() == 21);
  CHECK(prof.mean == doctest::Approx(5.0));
  CHECK(prof.min == doctest::Approx(4.5));
  CHECK(prof.frac_below(5.0) == doctest::Approx(10.0 / 21.0));
  CHECK_THROWS_AS(path_bmd_profile(g, line, 0.0), InvalidArgument);
  CHECK_THROWS_AS(path_bmd_profile(g, {{0, 0, 0}, {20, 0, 0}}, 0.5), OutOfField);
}

TEST_CASE("synthetic field precedence") {
  SyntheticBmd f;
  f.base = 0.2;
  f.ellipsoids = {{{0, 0, 0}, {10, 5, 5}, 0.1}};
  f.blocks = {{{-1, -1, -1}, {1, 1, 1}, 0.05}};
  CHECK(f.value_at({20, 0, 0}) == doctest::Approx(0.2));
  CHECK(f.value_at({8, 0, 0}) == doctest::Approx(0.1));
  CHECK(f.value_at({0.5, 0, 0}) == doctest::Approx(0.05));
}
