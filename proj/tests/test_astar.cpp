#include "layopt/astar.hpp"

#include "layopt/oracle.hpp"

#include <cmath>

#include "doctest.h"

namespace {

using layopt::astar_heuristic;
using layopt::astar_layout;
using layopt::AstarParams;
using layopt::AstarResult;
using layopt::AstarStatus;
using layopt::build_reachability_graph;
using layopt::default_catalog;
using layopt::PathStep;
using layopt::ReachGraph;
using layopt::Scene;

Scene base_scene() {
  Scene scene;
  scene.spacing = 0.5;
  scene.input = {0.0, 0.0};
  scene.catalog = {default_catalog()[0]};  // UR5e only
  return scene;
}

/// One candidate point; a single arm spans input to output.
Scene one_arm_scene() {
  Scene scene = base_scene();
  scene.floor_min = scene.floor_max = {0.5, 0.0};
  scene.outputs.push_back({{1.0, 0.0}, 1.0});
  return scene;
}

/// Two candidate points in a row; the output is out of reach of the first,
/// the second is out of reach of the input, so both arms are required.
Scene two_arm_scene() {
  Scene scene = base_scene();
  scene.floor_min = {0.5, 0.0};
  scene.floor_max = {1.0, 0.0};
  scene.outputs.push_back({{1.6, 0.0}, 1.0});
  return scene;
}

double milp_optimum(const Scene& scene) {
  const ReachGraph graph = build_reachability_graph(scene);
  layopt::FlowNetwork net = layopt::split_vertices(graph, scene);
  layopt::add_junction_gadgets(net, graph, scene);
  const layopt::MilpModel model = layopt::compile_milp(net, scene);
  const auto solution = layopt::solve_milp(model.lp, model.binaries);
  REQUIRE(solution.status == layopt::MilpStatus::optimal);
  return solution.objective;
}

}  // namespace

TEST_CASE("astar: heuristic counts chain elements to the farthest output") {
  Scene scene = base_scene();
  scene.floor_min = scene.floor_max = {0.5, 0.0};
  scene.outputs.push_back({{3.0, 0.0}, 1.0});
  const ReachGraph graph = build_reachability_graph(scene);

  // 3.0 m against a 1.7 m span per element.
  CHECK(astar_heuristic({}, scene, graph, 0.85) == 2.0);

  scene.outputs[0].pos = {1.69, 0.0};
  const ReachGraph near = build_reachability_graph(scene);
  CHECK(astar_heuristic({}, scene, near, 0.85) == 1.0);
}

TEST_CASE("astar: heuristic vanishes once every output is covered") {
  const Scene scene = one_arm_scene();
  const ReachGraph graph = build_reachability_graph(scene);
  REQUIRE(graph.placements.size() == 1);
  CHECK(astar_heuristic({0}, scene, graph, 0.85) == 0.0);
  CHECK(astar_heuristic({}, scene, graph, 0.85) == 1.0);
}

TEST_CASE("astar: an uncovered output needs at least one element") {
  // The output sits inside the arm's reach hole: near, yet not covered.
  Scene scene = base_scene();
  scene.floor_min = scene.floor_max = {0.5, 0.0};
  scene.outputs.push_back({{0.6, 0.0}, 1.0});
  const ReachGraph graph = build_reachability_graph(scene);
  CHECK(astar_heuristic({0}, scene, graph, 0.85) == 1.0);
}

TEST_CASE("astar: heuristic never exceeds the true remaining count") {
  // Oracle-sized scenes; h at the empty state must lower-bound the optimum
  // element count.
  for (double x : {1.0, 1.5, 2.0, 2.5}) {
    Scene scene = base_scene();
    scene.floor_min = {0.5, 0.0};
    scene.floor_max = {2.0, 0.0};
    scene.outputs.push_back({{x, 0.0}, 1.0});
    const ReachGraph graph = build_reachability_graph(scene);
    const auto oracle = layopt::brute_force_layout(graph, scene);
    REQUIRE(oracle.feasible);
    CHECK(astar_heuristic({}, scene, graph, 0.85) <=
          static_cast<double>(oracle.best_placements.size()));
  }
}

TEST_CASE("astar: solves the one-arm chain") {
  const Scene scene = one_arm_scene();
  const ReachGraph graph = build_reachability_graph(scene);
  const AstarResult result = astar_layout(scene, graph);

  REQUIRE(result.status == AstarStatus::solved);
  CHECK(result.cost == doctest::Approx(1.0));
  REQUIRE(result.layout.arms.size() == 1);
  CHECK(result.layout.total_cost == doctest::Approx(1.0));
  REQUIRE(result.layout.paths.size() == 1);
  REQUIRE(result.layout.paths[0].size() == 3);
  CHECK(result.layout.paths[0][1].kind == PathStep::Kind::arm);
}

TEST_CASE("astar: a 1.6 m gap on the half-meter lattice needs two arms") {
  const Scene scene = two_arm_scene();
  const ReachGraph graph = build_reachability_graph(scene);
  const AstarResult result = astar_layout(scene, graph);

  REQUIRE(result.status == AstarStatus::solved);
  CHECK(result.cost == doctest::Approx(2.0));
  REQUIRE(result.layout.arms.size() == 2);
  REQUIRE(result.layout.paths[0].size() == 4);
  CHECK(result.layout.paths[0][1].index == 0);
  CHECK(result.layout.paths[0][2].index == 1);
  CHECK(result.expanded == 3);  // start, one-arm state, goal
}

TEST_CASE("astar: agrees with the exact optimizer on small scenes") {
  std::vector<Scene> scenes{one_arm_scene(), two_arm_scene()};
  {
    Scene forked = base_scene();
    forked.floor_min = {0.5, -0.5};
    forked.floor_max = {1.0, 0.5};
    forked.outputs.push_back({{1.6, 0.4}, 1.0});
    forked.outputs.push_back({{1.6, -0.4}, 1.0});
    scenes.push_back(forked);
  }
  for (const Scene& scene : scenes) {
    const ReachGraph graph = build_reachability_graph(scene);
    const AstarResult result = astar_layout(scene, graph);
    REQUIRE(result.status == AstarStatus::solved);
    CHECK(result.cost == doctest::Approx(milp_optimum(scene)).epsilon(1e-9));
  }
}

TEST_CASE("astar: unreachable outputs fail fast as infeasible") {
  Scene scene = one_arm_scene();
  scene.outputs[0].pos = {5.0, 0.0};
  const ReachGraph graph = build_reachability_graph(scene);
  const AstarResult result = astar_layout(scene, graph);
  CHECK(result.status == AstarStatus::infeasible);
  CHECK(result.expanded == 0);
}

TEST_CASE("astar: a zero time budget reports a timeout") {
  const Scene scene = one_arm_scene();
  const ReachGraph graph = build_reachability_graph(scene);
  AstarParams params;
  params.time_limit_s = 0.0;
  CHECK(astar_layout(scene, graph, params).status == AstarStatus::timeout);
}

TEST_CASE("astar: a tiny memory budget degrades gracefully") {
  const Scene scene = two_arm_scene();
  const ReachGraph graph = build_reachability_graph(scene);
  AstarParams params;
  params.memory_limit_mb = 1e-4;  // ~100 bytes
  CHECK(astar_layout(scene, graph, params).status ==
        AstarStatus::out_of_memory);
}

TEST_CASE("astar: repeated runs are identical") {
  const Scene scene = two_arm_scene();
  const ReachGraph graph = build_reachability_graph(scene);
  const AstarResult first = astar_layout(scene, graph);
  const AstarResult second = astar_layout(scene, graph);
  CHECK(first.cost == second.cost);
  CHECK(first.expanded == second.expanded);
  CHECK(first.generated == second.generated);
}
