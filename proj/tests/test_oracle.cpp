#include "layopt/oracle.hpp"

#include <cmath>
#include <string>

#include "doctest.h"

namespace {

using layopt::brute_force_layout;
using layopt::build_reachability_graph;
using layopt::compile_milp;
using layopt::default_catalog;
using layopt::FlowNetwork;
using layopt::MilpModel;
using layopt::MilpStatus;
using layopt::OracleReport;
using layopt::ReachGraph;
using layopt::Scene;
using layopt::solve_milp;
using layopt::split_vertices;
using layopt::verify_solution;
using layopt::VerifyReport;

/// One candidate lattice point between the ports, stock UR5e only.
Scene chain_scene() {
  Scene scene;
  scene.floor_min = scene.floor_max = {0.5, 0.0};
  scene.spacing = 0.5;
  scene.input = {0.0, 0.0};
  scene.outputs.push_back({{1.0, 0.0}, 1.0});
  scene.catalog = {default_catalog()[0]};
  return scene;
}

struct Compiled {
  ReachGraph graph;
  FlowNetwork net;
  MilpModel model;
};

Compiled compile(const Scene& scene) {
  Compiled c;
  c.graph = build_reachability_graph(scene);
  c.net = split_vertices(c.graph, scene);
  add_junction_gadgets(c.net, c.graph, scene);
  c.model = compile_milp(c.net, scene);
  return c;
}

}  // namespace

TEST_CASE("oracle: single-arm chain") {
  const Scene scene = chain_scene();
  const ReachGraph graph = build_reachability_graph(scene);
  const OracleReport report = brute_force_layout(graph, scene);

  CHECK(report.feasible);
  CHECK(report.optimal_cost == doctest::Approx(1.0));
  REQUIRE(report.best_placements.size() == 1);
  CHECK(report.best_placements[0] == 0);
  CHECK(report.subsets_enumerated == 2);  // none, or the one arm
}

TEST_CASE("oracle: one slot offering two arm types keeps the cheap one") {
  Scene scene = chain_scene();
  scene.catalog = {default_catalog()[0], default_catalog()[1]};
  const ReachGraph graph = build_reachability_graph(scene);
  REQUIRE(graph.placements.size() == 2);

  const OracleReport report = brute_force_layout(graph, scene);
  CHECK(report.feasible);
  CHECK(report.optimal_cost == doctest::Approx(1.0));
  REQUIRE(report.best_placements.size() == 1);
  CHECK(graph.placements[report.best_placements[0]].type_index == 0);
  // One slot, three choices: none, the UR5e, the IRB4600.
  CHECK(report.subsets_enumerated == 3);
}

TEST_CASE("oracle: parallel candidates count as independent slots") {
  Scene scene = chain_scene();
  scene.floor_min = {0.5, -0.25};
  scene.floor_max = {0.5, 0.25};
  const ReachGraph graph = build_reachability_graph(scene);
  REQUIRE(graph.placements.size() == 2);

  const OracleReport report = brute_force_layout(graph, scene);
  CHECK(report.feasible);
  CHECK(report.optimal_cost == doctest::Approx(1.0));
  CHECK(report.best_placements.size() == 1);
  CHECK(report.subsets_enumerated == 4);  // 2 slots x (1 + 1 choice) each
}

TEST_CASE("oracle: infeasible when no candidate reaches the output") {
  Scene scene = chain_scene();
  scene.outputs[0].pos = {5.0, 0.0};
  const ReachGraph graph = build_reachability_graph(scene);

  const OracleReport report = brute_force_layout(graph, scene);
  CHECK_FALSE(report.feasible);
  CHECK(std::isinf(report.optimal_cost));
  CHECK(report.best_placements.empty());
}

TEST_CASE("oracle: heavy boxes need the heavy arm") {
  Scene scene = chain_scene();
  scene.outputs[0].weight = 10.0;  // above the UR5e payload

  const ReachGraph light = build_reachability_graph(scene);
  CHECK_FALSE(brute_force_layout(light, scene).feasible);

  scene.catalog.push_back(default_catalog()[1]);
  const ReachGraph both = build_reachability_graph(scene);
  const OracleReport report = brute_force_layout(both, scene);
  CHECK(report.feasible);
  CHECK(report.optimal_cost == doctest::Approx(3.0));
}

TEST_CASE("oracle: candidate cap guards against runaway enumeration") {
  Scene scene = chain_scene();
  scene.floor_min = {0.0, -4.0};
  scene.floor_max = {8.0, 4.0};
  const ReachGraph graph = build_reachability_graph(scene);
  REQUIRE(graph.placements.size() > 14);
  CHECK_THROWS_WITH_AS(brute_force_layout(graph, scene),
                       doctest::Contains("cap exceeded"), std::runtime_error);
}

TEST_CASE("oracle: verify passes an optimal solver solution") {
  Scene scene = chain_scene();
  scene.floor_min = {0.25, 0.0};
  scene.floor_max = {0.75, 0.0};
  const Compiled c = compile(scene);

  const auto solution = solve_milp(c.model.lp, c.model.binaries);
  REQUIRE(solution.status == MilpStatus::optimal);

  const VerifyReport report = verify_solution(c.net, c.model, scene, solution.x);
  INFO(report.to_text());
  CHECK(report.ok());
  CHECK(report.worst() <= 1e-9);
}

TEST_CASE("oracle: verify flags each injected fault in its family") {
  Scene scene = chain_scene();
  scene.catalog.push_back(default_catalog()[1]);  // two arms on one slot
  const Compiled c = compile(scene);

  const auto solution = solve_milp(c.model.lp, c.model.binaries);
  REQUIRE(solution.status == MilpStatus::optimal);
  REQUIRE(verify_solution(c.net, c.model, scene, solution.x).ok());

  // Locate the two arm selection arcs and the arcs around the chosen arm.
  int aux_a = -1, aux_b = -1;
  for (int a = 0; a < c.model.num_arcs; ++a) {
    if (c.net.arcs[a].kind != layopt::ArcKind::robot_aux) continue;
    (aux_a < 0 ? aux_a : aux_b) = a;
  }
  REQUIRE(aux_b >= 0);

  SUBCASE("occupancy: both arms on the same lattice point") {
    Eigen::VectorXd x = solution.x;
    x[c.model.s_var(aux_a)] = 1.0;
    x[c.model.s_var(aux_b)] = 1.0;
    const VerifyReport report = verify_solution(c.net, c.model, scene, x);
    CHECK(report.occupancy.violation > 0.5);
    CHECK_FALSE(report.ok());
  }

  SUBCASE("capacity: flow on an unselected arc") {
    Eigen::VectorXd x = solution.x;
    const int off = x[c.model.s_var(aux_a)] < 0.5 ? aux_a : aux_b;
    x[c.model.f_var(off, 0)] = 1.0;
    const VerifyReport report = verify_solution(c.net, c.model, scene, x);
    CHECK(report.capacity.violation == doctest::Approx(1.0));
    CHECK(report.capacity.where.find("arc") != std::string::npos);
  }

  SUBCASE("conservation: flow vanishes mid-path") {
    Eigen::VectorXd x = solution.x;
    const int on = x[c.model.s_var(aux_a)] > 0.5 ? aux_a : aux_b;
    x[c.model.f_var(on, 0)] = 0.0;  // box no longer crosses the arm
    const VerifyReport report = verify_solution(c.net, c.model, scene, x);
    CHECK(report.conservation.violation == doctest::Approx(1.0));
    CHECK(report.conservation.where.find("box 0") != std::string::npos);
  }

  SUBCASE("integrality: half-selected arm") {
    Eigen::VectorXd x = solution.x;
    x[c.model.s_var(aux_a)] = 0.5;
    const VerifyReport report = verify_solution(c.net, c.model, scene, x);
    CHECK(report.integrality.violation == doctest::Approx(0.5));
  }
}

TEST_CASE("oracle: verify flags payload violations on the path") {
  Scene scene = chain_scene();
  scene.outputs[0].weight = 10.0;
  scene.catalog.push_back(default_catalog()[1]);
  const Compiled c = compile(scene);

  const auto solution = solve_milp(c.model.lp, c.model.binaries);
  REQUIRE(solution.status == MilpStatus::optimal);

  int light_aux = -1;
  for (int a = 0; a < c.model.num_arcs; ++a) {
    const auto& arc = c.net.arcs[a];
    if (arc.kind == layopt::ArcKind::robot_aux && arc.payload < 10.0)
      light_aux = a;
  }
  REQUIRE(light_aux >= 0);

  Eigen::VectorXd x = solution.x;
  x[c.model.f_var(light_aux, 0)] = 1.0;
  const VerifyReport report = verify_solution(c.net, c.model, scene, x);
  CHECK(report.payload.violation == doctest::Approx(1.0));
  CHECK_FALSE(report.ok());
}

TEST_CASE("oracle: finite differences recover simple gradients") {
  const auto f = [](const Eigen::VectorXd& v) {
    return v[0] * v[0] + 3.0 * v[1] + std::sin(v[2]);
  };
  Eigen::VectorXd at(3);
  at << 3.0, 2.0, 0.5;
  const Eigen::VectorXd grad = layopt::finite_diff_gradient(f, at);
  CHECK(grad[0] == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(grad[1] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(grad[2] == doctest::Approx(std::cos(0.5)).epsilon(1e-6));
}
