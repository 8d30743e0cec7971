#include "layopt/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace layopt {

namespace {

constexpr int kDirDx[kNumDirections] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDirDy[kNumDirections] = {0, 1, 1, 1, 0, -1, -1, -1};

/// Occupancy key on the doubled lattice: arms and junctions sit on even
/// coordinates, belt spans on their (odd-coordinate) midpoints, so a span is
/// blocked against its reverse twin and against crossing diagonals without
/// colliding with junction gadgets at its endpoints.
long doubled_key(int x2, int y2) { return static_cast<long>(x2) * 1000003L + y2; }

long placement_coor_key(const Placement& p, int nx) {
  const int ix = p.grid_index % nx;
  const int iy = p.grid_index / nx;
  if (p.dir < 0) return doubled_key(2 * ix, 2 * iy);
  return doubled_key(2 * ix + kDirDx[p.dir], 2 * iy + kDirDy[p.dir]);
}

long point_coor_key(int grid_index, int nx) {
  return doubled_key(2 * (grid_index % nx), 2 * (grid_index / nx));
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

FlowNetwork split_vertices(const ReachGraph& graph, const Scene& scene) {
  FlowNetwork net;
  net.num_outputs = graph.num_outputs;
  net.num_placements = static_cast<int>(graph.placements.size());
  net.placements = graph.placements;
  net.points = graph.points;
  net.num_vertices = 1 + net.num_outputs + 2 * net.num_placements;

  auto rewire = [&](int reach_vertex, bool as_source) {
    if (!graph.is_placement_vertex(reach_vertex)) return reach_vertex;
    const int k = graph.placement_of_vertex(reach_vertex);
    return as_source ? net.out_copy(k) : net.in_copy(k);
  };

  net.arcs.reserve(graph.arcs.size() + graph.placements.size());
  for (const Arc& arc : graph.arcs) {
    NetArc a;
    a.src = rewire(arc.src, true);
    a.dst = rewire(arc.dst, false);
    a.kind = ArcKind::original;
    net.arcs.push_back(a);
  }

  const int nx = graph.nx;
  for (int k = 0; k < net.num_placements; ++k) {
    const Placement& p = graph.placements[k];
    const RobotType& type = scene.catalog[p.type_index];
    NetArc a;
    a.src = net.in_copy(k);
    a.dst = net.out_copy(k);
    a.kind = ArcKind::robot_aux;
    a.placement = k;
    a.payload = type.payload;
    a.coor_key = placement_coor_key(p, nx);
    a.weight = placement_cost(p, scene);
    net.arcs.push_back(a);
  }
  return net;
}

void add_junction_gadgets(FlowNetwork& net, const ReachGraph& graph,
                          const Scene& scene) {
  const int num_points = static_cast<int>(graph.points.size());
  const int num_types = static_cast<int>(scene.catalog.size());

  // Belt placements grouped by the lattice point they leave from / arrive at.
  std::vector<std::vector<int>> leaving(num_points), arriving(num_points);
  // (anchor point, dir, type) -> placement, to pair collinear continuations.
  std::map<std::tuple<int, int, int>, int> by_anchor;
  for (int k = 0; k < net.num_placements; ++k) {
    const Placement& p = net.placements[k];
    if (p.dir < 0) continue;
    leaving[p.grid_index].push_back(k);
    arriving[p.head_grid_index].push_back(k);
    by_anchor[{p.grid_index, p.dir, p.type_index}] = k;
  }

  for (int q = 0; q < num_points; ++q) {
    // Inline motors: an upstream segment ends at q, a same-direction
    // same-type segment continues from q; the pair shares one motor.
    for (int dir = 0; dir < kNumDirections; ++dir) {
      for (int t = 0; t < num_types; ++t) {
        const auto child = by_anchor.find({q, dir, t});
        if (child == by_anchor.end()) continue;
        int parent = -1;
        for (int k : arriving[q]) {
          const Placement& p = net.placements[k];
          if (p.dir == dir && p.type_index == t) {
            parent = k;
            break;
          }
        }
        if (parent < 0) continue;
        NetArc a;
        a.src = net.out_copy(parent);
        a.dst = net.in_copy(child->second);
        a.kind = ArcKind::inline_motor;
        a.weight = -scene.costs.motor;
        a.inline_parent = parent;
        a.inline_child = child->second;
        net.arcs.push_back(a);
      }
    }

    if (arriving[q].empty() || leaving[q].empty()) continue;

    // One multi-way and one turning gadget per point; occupancy at q lets
    // the optimizer keep at most one of them (or an arm instead).
    for (int variant = 0; variant < 2; ++variant) {
      JunctionGadget g;
      g.grid_index = q;
      g.multiway = variant == 0;
      g.vplus = net.num_vertices++;
      g.vminus = net.num_vertices++;
      const int gadget_index = static_cast<int>(net.gadgets.size());

      NetArc aux;
      aux.src = g.vplus;
      aux.dst = g.vminus;
      aux.kind = g.multiway ? ArcKind::multiway_aux : ArcKind::turning_aux;
      aux.weight = g.multiway ? scene.costs.multiway_junction
                              : scene.costs.turning_junction;
      aux.coor_key = point_coor_key(q, graph.nx);
      aux.gadget = gadget_index;
      g.aux_arc = static_cast<int>(net.arcs.size());
      net.arcs.push_back(aux);

      for (int k : arriving[q]) {
        NetArc port;
        port.src = net.out_copy(k);
        port.dst = g.vplus;
        port.kind = ArcKind::junction_port;
        port.gadget = gadget_index;
        net.arcs.push_back(port);
      }
      for (int k : leaving[q]) {
        NetArc port;
        port.src = g.vminus;
        port.dst = net.in_copy(k);
        port.kind = ArcKind::junction_port;
        port.gadget = gadget_index;
        net.arcs.push_back(port);
      }
      net.gadgets.push_back(g);
    }
  }
}

MilpModel compile_milp(const FlowNetwork& net, const Scene& scene) {
  MilpModel model;
  model.num_arcs = static_cast<int>(net.arcs.size());
  model.num_boxes = static_cast<int>(scene.outputs.size());
  LinearProgram& lp = model.lp;

  // Selection variables. Original arcs carry no cost and sit in no selection
  // row, so any solution keeps its objective when they are switched on;
  // fixing them shrinks the search space without moving the optimum.
  for (int a = 0; a < model.num_arcs; ++a) {
    const bool fixed_on = net.arcs[a].kind == ArcKind::original;
    lp.add_var(fixed_on ? 1.0 : 0.0, 1.0, net.arcs[a].weight,
               "s_" + std::to_string(a));
    model.binaries.push_back(a);
  }
  // Flow variables; payload shortfalls become [0,0] bounds.
  for (int a = 0; a < model.num_arcs; ++a) {
    for (int i = 0; i < model.num_boxes; ++i) {
      const bool blocked = net.arcs[a].payload < scene.outputs[i].weight;
      lp.add_var(0.0, blocked ? 0.0 : 1.0, 0.0,
                 "f_" + std::to_string(a) + "_" + std::to_string(i));
    }
  }

  // Occupancy: at most one costed element per doubled-lattice location.
  std::map<long, std::vector<int>> occupants;
  for (int a = 0; a < model.num_arcs; ++a)
    if (net.arcs[a].coor_key >= 0) occupants[net.arcs[a].coor_key].push_back(a);
  for (const auto& [key, arcs] : occupants) {
    if (arcs.size() < 2) continue;
    LinearProgram::Row row;
    row.name = "occ_" + std::to_string(key);
    row.lo = -kInf;
    row.hi = 1.0;
    for (int a : arcs) row.terms.push_back({model.s_var(a), 1.0});
    lp.add_row(std::move(row));
  }

  // Capacity: f_{a,i} <= s_a.
  for (int a = 0; a < model.num_arcs; ++a) {
    for (int i = 0; i < model.num_boxes; ++i) {
      LinearProgram::Row row;
      row.name = "cap_" + std::to_string(a) + "_" + std::to_string(i);
      row.lo = -kInf;
      row.hi = 0.0;
      row.terms.push_back({model.f_var(a, i), 1.0});
      row.terms.push_back({model.s_var(a), -1.0});
      lp.add_row(std::move(row));
    }
  }

  // Flow balance: inflow - outflow per vertex and box.
  std::vector<std::vector<int>> in_arcs(net.num_vertices),
      out_arcs(net.num_vertices);
  for (int a = 0; a < model.num_arcs; ++a) {
    out_arcs[net.arcs[a].src].push_back(a);
    in_arcs[net.arcs[a].dst].push_back(a);
  }
  for (int v = 0; v < net.num_vertices; ++v) {
    const bool is_io = v <= net.num_outputs;
    if (!is_io && in_arcs[v].empty() && out_arcs[v].empty()) continue;
    for (int i = 0; i < model.num_boxes; ++i) {
      LinearProgram::Row row;
      row.name = "bal_" + std::to_string(v) + "_" + std::to_string(i);
      double rhs = 0.0;
      if (v == net.input_vertex()) rhs = -1.0;
      if (v == net.output_vertex(i)) rhs = 1.0;
      row.lo = rhs;
      row.hi = rhs;
      for (int a : in_arcs[v]) row.terms.push_back({model.f_var(a, i), 1.0});
      for (int a : out_arcs[v]) row.terms.push_back({model.f_var(a, i), -1.0});
      lp.add_row(std::move(row));
    }
  }

  // Junction coupling rows.
  std::vector<int> aux_of(net.num_placements, -1);
  for (int a = 0; a < model.num_arcs; ++a)
    if (net.arcs[a].kind == ArcKind::robot_aux)
      aux_of[net.arcs[a].placement] = a;

  std::map<int, std::vector<int>> inline_by_parent, inline_by_child;
  for (int a = 0; a < model.num_arcs; ++a) {
    const NetArc& arc = net.arcs[a];
    if (arc.kind == ArcKind::inline_motor) {
      for (const auto& [tag, segment] :
           {std::pair{"ilp_", arc.inline_parent},
            std::pair{"ilc_", arc.inline_child}}) {
        LinearProgram::Row row;
        row.name = tag + std::to_string(a);
        row.lo = -kInf;
        row.hi = 0.0;
        row.terms.push_back({model.s_var(a), 1.0});
        row.terms.push_back({model.s_var(aux_of[segment]), -1.0});
        lp.add_row(std::move(row));
      }
      inline_by_parent[arc.inline_parent].push_back(a);
      inline_by_child[arc.inline_child].push_back(a);
    } else if (arc.kind == ArcKind::junction_port) {
      LinearProgram::Row row;
      row.name = "pc_" + std::to_string(a);
      row.lo = -kInf;
      row.hi = 0.0;
      row.terms.push_back({model.s_var(a), 1.0});
      row.terms.push_back(
          {model.s_var(net.gadgets[arc.gadget].aux_arc), -1.0});
      lp.add_row(std::move(row));
    }
  }
  // Each segment joins at most one inline motor on each side.
  for (const auto& [side, groups] :
       {std::pair{"ils_", &inline_by_parent}, std::pair{"ile_", &inline_by_child}}) {
    for (const auto& [segment, arcs] : *groups) {
      LinearProgram::Row row;
      row.name = side + std::to_string(segment);
      row.lo = -kInf;
      row.hi = 1.0;
      for (int a : arcs) row.terms.push_back({model.s_var(a), 1.0});
      lp.add_row(std::move(row));
    }
  }
  // A selected turning junction uses exactly one port on each side.
  for (size_t g = 0; g < net.gadgets.size(); ++g) {
    const JunctionGadget& gadget = net.gadgets[g];
    if (gadget.multiway) continue;
    LinearProgram::Row in_row, out_row;
    in_row.name = "tin_" + std::to_string(g);
    out_row.name = "tout_" + std::to_string(g);
    in_row.lo = in_row.hi = 0.0;
    out_row.lo = out_row.hi = 0.0;
    for (int a = 0; a < model.num_arcs; ++a) {
      const NetArc& arc = net.arcs[a];
      if (arc.kind != ArcKind::junction_port || arc.gadget != static_cast<int>(g))
        continue;
      (arc.dst == gadget.vplus ? in_row : out_row)
          .terms.push_back({model.s_var(a), 1.0});
    }
    in_row.terms.push_back({model.s_var(gadget.aux_arc), -1.0});
    out_row.terms.push_back({model.s_var(gadget.aux_arc), -1.0});
    lp.add_row(std::move(in_row));
    lp.add_row(std::move(out_row));
  }

  return model;
}

Layout extract_layout(const FlowNetwork& net, const MilpModel& model,
                      const Eigen::VectorXd& x, const Scene& scene) {
  Layout layout;
  auto selected = [&](int a) { return x[model.s_var(a)] >= 0.5; };

  std::vector<int> junction_of_gadget(net.gadgets.size(), -1);
  for (int a = 0; a < model.num_arcs; ++a) {
    const NetArc& arc = net.arcs[a];
    if (!selected(a)) continue;
    switch (arc.kind) {
      case ArcKind::robot_aux: {
        const Placement& p = net.placements[arc.placement];
        if (scene.catalog[p.type_index].kind == RobotKind::arm)
          layout.arms.push_back({arc.placement, p.type_index, p.position});
        else
          layout.belts.push_back(
              {arc.placement, p.type_index, p.dir, p.position, p.head});
        layout.total_cost += arc.weight;
        break;
      }
      case ArcKind::multiway_aux:
      case ArcKind::turning_aux: {
        junction_of_gadget[arc.gadget] =
            static_cast<int>(layout.junctions.size());
        layout.junctions.push_back(
            {arc.kind == ArcKind::multiway_aux ? Layout::Junction::Kind::multiway
                                               : Layout::Junction::Kind::turning,
             net.points[net.gadgets[arc.gadget].grid_index], a});
        layout.total_cost += arc.weight;
        break;
      }
      case ArcKind::inline_motor: {
        layout.junctions.push_back({Layout::Junction::Kind::inline_motor,
                                    net.placements[arc.inline_parent].head, a});
        layout.total_cost += arc.weight;
        break;
      }
      default:
        break;
    }
  }

  std::vector<std::vector<int>> out_arcs(net.num_vertices);
  for (int a = 0; a < model.num_arcs; ++a)
    out_arcs[net.arcs[a].src].push_back(a);

  const int placements_end = 1 + net.num_outputs + 2 * net.num_placements;
  for (int box = 0; box < model.num_boxes; ++box) {
    auto carries = [&](int a) { return x[model.f_var(a, box)] >= 0.5; };

    // Hop counts to the box's output over the arcs carrying its flow.
    std::vector<int> dist(net.num_vertices, -1);
    std::vector<std::vector<int>> in_support(net.num_vertices);
    for (int a = 0; a < model.num_arcs; ++a)
      if (carries(a)) in_support[net.arcs[a].dst].push_back(a);
    std::queue<int> frontier;
    dist[net.output_vertex(box)] = 0;
    frontier.push(net.output_vertex(box));
    while (!frontier.empty()) {
      const int v = frontier.front();
      frontier.pop();
      for (int a : in_support[v]) {
        const int u = net.arcs[a].src;
        if (dist[u] < 0) {
          dist[u] = dist[v] + 1;
          frontier.push(u);
        }
      }
    }
    if (dist[net.input_vertex()] < 0)
      throw std::runtime_error("disconnected output " + std::to_string(box));

    // Walk from the input, always taking the smallest next vertex id that
    // still heads toward the output: the lexicographically smallest among
    // the fewest-hop vertex sequences.
    std::vector<int> vertex_path{net.input_vertex()};
    int u = net.input_vertex();
    while (u != net.output_vertex(box)) {
      int next = -1;
      for (int a : out_arcs[u]) {
        if (!carries(a)) continue;
        const int v = net.arcs[a].dst;
        if (dist[v] != dist[u] - 1) continue;
        if (next < 0 || v < next) next = v;
      }
      if (next < 0)  // cannot happen once dist[input] is set
        throw std::runtime_error("disconnected output " + std::to_string(box));
      vertex_path.push_back(next);
      u = next;
    }

    // Collapse copy pairs and gadget pairs into element steps.
    std::vector<PathStep> steps;
    for (size_t j = 0; j < vertex_path.size(); ++j) {
      const int v = vertex_path[j];
      if (v == net.input_vertex()) {
        steps.push_back({PathStep::Kind::input, -1});
      } else if (v <= net.num_outputs) {
        steps.push_back({PathStep::Kind::output, v - 1});
      } else if (v < placements_end) {
        const int k = (v - 1 - net.num_outputs) / 2;
        const bool is_arm =
            scene.catalog[net.placements[k].type_index].kind == RobotKind::arm;
        steps.push_back(
            {is_arm ? PathStep::Kind::arm : PathStep::Kind::belt, k});
        ++j;  // skip the matching out-copy
      } else {
        const int g = (v - placements_end) / 2;
        steps.push_back({PathStep::Kind::junction, junction_of_gadget[g]});
        ++j;  // skip the matching exit vertex
      }
    }
    layout.paths.push_back(std::move(steps));
  }
  return layout;
}

std::string write_lp_text(const LinearProgram& lp,
                          const std::vector<int>& binaries) {
  std::ostringstream out;
  auto write_terms = [&](const std::vector<std::pair<int, double>>& terms) {
    for (const auto& [v, c] : terms)
      out << (c < 0 ? " - " : " + ") << format_number(std::abs(c)) << ' '
          << lp.var_names[v];
  };

  out << "Minimize\n obj:";
  std::vector<std::pair<int, double>> objective;
  for (int v = 0; v < lp.num_vars; ++v)
    if (lp.cost[v] != 0.0) objective.push_back({v, lp.cost[v]});
  write_terms(objective);
  out << "\nSubject To\n";
  for (size_t r = 0; r < lp.rows.size(); ++r) {
    const auto& row = lp.rows[r];
    if (row.terms.empty()) continue;
    const std::string name =
        row.name.empty() ? "r" + std::to_string(r) : row.name;
    if (row.lo == row.hi) {
      out << ' ' << name << ':';
      write_terms(row.terms);
      out << " = " << format_number(row.lo) << '\n';
      continue;
    }
    if (std::isfinite(row.hi)) {
      out << ' ' << name << ':';
      write_terms(row.terms);
      out << " <= " << format_number(row.hi) << '\n';
    }
    if (std::isfinite(row.lo)) {
      out << ' ' << name << (std::isfinite(row.hi) ? "_lo:" : ":");
      write_terms(row.terms);
      out << " >= " << format_number(row.lo) << '\n';
    }
  }
  out << "Bounds\n";
  for (int v = 0; v < lp.num_vars; ++v) {
    const double lo = lp.lower[v], hi = lp.upper[v];
    if (!std::isfinite(lo) && !std::isfinite(hi)) {
      out << ' ' << lp.var_names[v] << " free\n";
    } else if (lo == hi) {
      out << ' ' << lp.var_names[v] << " = " << format_number(lo) << '\n';
    } else {
      out << ' ' << format_number(lo) << " <= " << lp.var_names[v]
          << " <= " << format_number(hi) << '\n';
    }
  }
  if (!binaries.empty()) {
    out << "Binaries\n";
    for (size_t i = 0; i < binaries.size(); ++i) {
      out << (i % 8 == 0 ? (i == 0 ? " " : "\n ") : " ")
          << lp.var_names[binaries[i]];
    }
    out << '\n';
  }
  out << "End\n";
  return out.str();
}

}  // namespace layopt
