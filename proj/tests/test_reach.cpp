#include "layopt/reach.hpp"

#include <cmath>
#include <map>
#include <set>

#include "doctest.h"

namespace {

using layopt::annuli_intersect;
using layopt::annulus_meets_segment;
using layopt::arm_party;
using layopt::belt_party;
using layopt::build_reachability_graph;
using layopt::can_hand_over;
using layopt::default_catalog;
using layopt::direction_step;
using layopt::io_party;
using layopt::placement_cost;
using layopt::point_segment_distance;
using layopt::ReachGraph;
using layopt::RobotKind;
using layopt::Scene;
using layopt::Vec2;

Scene arm_scene() {
  Scene scene;
  scene.floor_min = {0.0, 0.0};
  scene.floor_max = {1.0, 1.0};
  scene.spacing = 0.5;
  scene.input = {0.0, 0.0};
  scene.outputs.push_back({{1.0, 0.0}, 1.0});
  scene.catalog = {default_catalog()[0]};  // UR5e only
  return scene;
}

}  // namespace

TEST_CASE("reach: the eight lattice directions") {
  const double s = 0.5;
  CHECK(direction_step(0, s) == Vec2(s, 0.0));
  CHECK(direction_step(1, s) == Vec2(s, s));
  CHECK(direction_step(2, s) == Vec2(0.0, s));
  CHECK(direction_step(3, s) == Vec2(-s, s));
  CHECK(direction_step(4, s) == Vec2(-s, 0.0));
  CHECK(direction_step(5, s) == Vec2(-s, -s));
  CHECK(direction_step(6, s) == Vec2(0.0, -s));
  CHECK(direction_step(7, s) == Vec2(s, -s));
  for (int dir = 1; dir < 8; dir += 2)
    CHECK(direction_step(dir, s).norm() == doctest::Approx(s * std::sqrt(2.0)));
}

TEST_CASE("reach: point to segment distance") {
  CHECK(point_segment_distance({0.0, 1.0}, {-1.0, 0.0}, {1.0, 0.0}) ==
        doctest::Approx(1.0));
  // Beyond the end, the distance clamps to the endpoint.
  CHECK(point_segment_distance({2.0, 0.0}, {-1.0, 0.0}, {1.0, 0.0}) ==
        doctest::Approx(1.0));
  CHECK(point_segment_distance({3.0, 4.0}, {0.0, 0.0}, {0.0, 0.0}) ==
        doctest::Approx(5.0));
}

TEST_CASE("reach: annulus pair intersection") {
  // Two stock arms whose outer circles exactly touch.
  CHECK(annuli_intersect({0, 0}, 0.18, 0.85, {1.7, 0}, 0.18, 0.85));
  CHECK_FALSE(annuli_intersect({0, 0}, 0.18, 0.85, {1.701, 0}, 0.18, 0.85));
  // Identical rings overlap everywhere.
  CHECK(annuli_intersect({0, 0}, 0.18, 0.85, {0, 0}, 0.18, 0.85));
  // A small ring deep inside the other's hole touches nothing.
  CHECK_FALSE(annuli_intersect({0, 0}, 2.0, 3.0, {0, 0}, 0.1, 0.2));
}

TEST_CASE("reach: annulus meets segment") {
  // A chord through the ring.
  CHECK(annulus_meets_segment({0, 0}, 0.18, 0.85, {0.5, -1.0}, {0.5, 1.0}));
  // Crossing the hole still crosses the ring on the way out.
  CHECK(annulus_meets_segment({0, 0}, 0.18, 0.85, {0.05, -1.0}, {0.05, 1.0}));
  // Entirely inside the hole.
  CHECK_FALSE(
      annulus_meets_segment({0, 0}, 0.18, 0.85, {-0.05, 0.0}, {0.05, 0.0}));
  // Entirely beyond reach.
  CHECK_FALSE(
      annulus_meets_segment({0, 0}, 0.18, 0.85, {2.0, -1.0}, {2.0, 1.0}));
}

TEST_CASE("reach: handover pairs that never connect directly") {
  const auto io_a = io_party({0.0, 0.0});
  const auto io_b = io_party({0.5, 0.0});
  const auto belt_a = belt_party({0.0, 0.0}, {0.5, 0.0});
  const auto belt_b = belt_party({0.5, 0.0}, {1.0, 0.0});
  CHECK_FALSE(can_hand_over(io_a, io_b));
  CHECK_FALSE(can_hand_over(belt_a, io_a));
  CHECK_FALSE(can_hand_over(belt_a, belt_b));
}

TEST_CASE("reach: arm to port handovers respect the annulus") {
  const auto ur5e = arm_party(default_catalog()[0], {0.0, 0.0});
  CHECK(can_hand_over(ur5e, io_party({0.5, 0.0})));
  CHECK(can_hand_over(ur5e, io_party({0.18, 0.0})));  // closed inner boundary
  CHECK(can_hand_over(ur5e, io_party({0.85, 0.0})));  // closed outer boundary
  CHECK_FALSE(can_hand_over(ur5e, io_party({0.17, 0.0})));  // inside the hole
  CHECK_FALSE(can_hand_over(ur5e, io_party({0.86, 0.0})));  // out of reach
}

TEST_CASE("reach: arm to arm handovers need reach overlap and base room") {
  const auto catalog = default_catalog();
  const auto at = [&](int t, double x) { return arm_party(catalog[t], {x, 0.0}); };
  CHECK(can_hand_over(at(0, 0.0), at(0, 1.7)));
  CHECK_FALSE(can_hand_over(at(0, 0.0), at(0, 1.71)));
  // Annuli overlap but the bases collide (clearance 0.15 + 0.15).
  CHECK_FALSE(can_hand_over(at(0, 0.0), at(0, 0.25)));
  // Mixed pair: outer radii 0.85 + 2.05.
  CHECK(can_hand_over(at(0, 0.0), at(1, 2.9)));
  CHECK_FALSE(can_hand_over(at(0, 0.0), at(1, 2.91)));
  // Symmetric in argument order.
  CHECK(can_hand_over(at(1, 2.9), at(0, 0.0)));
}

TEST_CASE("reach: arm to belt handovers keep the base off the centerline") {
  const auto ur5e = arm_party(default_catalog()[0], {0.0, 0.0});
  CHECK(can_hand_over(ur5e, belt_party({0.5, -0.5}, {0.5, 0.5})));
  // Base sitting on the belt span.
  CHECK_FALSE(can_hand_over(ur5e, belt_party({0.0, -0.5}, {0.0, 0.5})));
  CHECK_FALSE(can_hand_over(ur5e, belt_party({5.0, 0.0}, {5.0, 1.0})));
}

TEST_CASE("reach: placement prices") {
  Scene scene = arm_scene();
  scene.catalog.push_back(default_catalog()[2]);  // add the belt kind

  layopt::Placement arm;
  arm.type_index = 0;
  arm.position = {0.0, 0.0};
  arm.head = arm.position;
  CHECK(placement_cost(arm, scene) == doctest::Approx(1.0));

  layopt::Placement axis_belt;
  axis_belt.type_index = 1;
  axis_belt.position = {0.0, 0.0};
  axis_belt.head = {0.5, 0.0};
  CHECK(placement_cost(axis_belt, scene) == doctest::Approx(0.2));  // 0.2*0.5+0.1

  layopt::Placement diag_belt = axis_belt;
  diag_belt.head = {0.5, 0.5};
  CHECK(placement_cost(diag_belt, scene) ==
        doctest::Approx(0.2 * 0.5 * std::sqrt(2.0) + 0.1));
}

TEST_CASE("reach: three-vertex graph around a single candidate point") {
  Scene scene = arm_scene();
  scene.floor_min = scene.floor_max = {0.5, 0.0};  // one lattice point
  const ReachGraph g = build_reachability_graph(scene);

  REQUIRE(g.points.size() == 1);
  REQUIRE(g.placements.size() == 1);
  CHECK(g.num_vertices() == 3);
  REQUIRE(g.arcs.size() == 2);
  CHECK(g.arcs[0].src == g.input_vertex());
  CHECK(g.arcs[0].dst == g.placement_vertex(0));
  CHECK(g.arcs[1].src == g.placement_vertex(0));
  CHECK(g.arcs[1].dst == g.output_vertex(0));
  CHECK(g.warnings.empty());
}

TEST_CASE("reach: placement enumeration is point-major over the catalog") {
  Scene scene = arm_scene();
  scene.catalog.push_back(default_catalog()[1]);  // UR5e + IRB4600
  const ReachGraph g = build_reachability_graph(scene);

  REQUIRE(g.points.size() == 9);  // 3x3 lattice
  REQUIRE(g.placements.size() == 18);
  CHECK(g.placements[0].grid_index == 0);
  CHECK(g.placements[0].type_index == 0);
  CHECK(g.placements[1].grid_index == 0);
  CHECK(g.placements[1].type_index == 1);
  CHECK(g.placements[2].grid_index == 1);
}

TEST_CASE("reach: belt spans stay on the lattice") {
  Scene scene = arm_scene();
  scene.catalog.push_back(default_catalog()[2]);
  const ReachGraph g = build_reachability_graph(scene);

  // 9 arm placements, then belts: 4 corners * 3 + 4 edges * 5 + 1 center * 8.
  REQUIRE(g.placements.size() == 9 + 40);
  std::map<int, int> spans_per_point;
  for (const auto& p : g.placements) {
    if (p.dir < 0) continue;
    ++spans_per_point[p.grid_index];
    REQUIRE(p.head_grid_index >= 0);
    REQUIRE(p.head_grid_index < 9);
    CHECK((p.head - p.position).norm() ==
          doctest::Approx((p.dir % 2 == 0 ? 1.0 : std::sqrt(2.0)) * 0.5));
  }
  CHECK(spans_per_point[0] == 3);  // corner
  CHECK(spans_per_point[1] == 5);  // edge midpoint
  CHECK(spans_per_point[4] == 8);  // center
}

TEST_CASE("reach: placement arcs come in symmetric pairs") {
  Scene scene = arm_scene();
  scene.catalog.push_back(default_catalog()[2]);
  const ReachGraph g = build_reachability_graph(scene);

  std::set<std::pair<int, int>> arcs;
  for (const auto& arc : g.arcs) arcs.insert({arc.src, arc.dst});
  int placement_arcs = 0;
  for (const auto& [src, dst] : arcs) {
    if (!g.is_placement_vertex(src) || !g.is_placement_vertex(dst)) continue;
    ++placement_arcs;
    CHECK(arcs.count({dst, src}) == 1);
  }
  CHECK(placement_arcs > 0);
}

TEST_CASE("reach: isolated ports are reported, not fatal") {
  Scene scene = arm_scene();
  scene.floor_min = {5.0, 5.0};
  scene.floor_max = {6.0, 6.0};
  scene.outputs[0].pos = {10.0, 10.0};
  const ReachGraph g = build_reachability_graph(scene);

  REQUIRE(g.warnings.size() == 2);
  CHECK(g.warnings[0] == "input isolated");
  CHECK(g.warnings[1] == "output 0 unreachable");
}
