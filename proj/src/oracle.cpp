#include "layopt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace layopt {

namespace {

constexpr int kDirDx[kNumDirections] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDirDy[kNumDirections] = {0, 1, 1, 1, 0, -1, -1, -1};

/// Occupancy slot on the doubled lattice: arms claim their base point, belt
/// segments the midpoint of their span. Recomputed here so the oracle stays
/// independent of the flow-network compilation.
long slot_key(const Placement& p, int nx) {
  int x2 = 2 * (p.grid_index % nx);
  int y2 = 2 * (p.grid_index / nx);
  if (p.dir >= 0) {
    x2 += kDirDx[p.dir];
    y2 += kDirDy[p.dir];
  }
  return static_cast<long>(x2) * 1000003L + y2;
}

/// One belt-to-belt move a junction or inline motor makes available.
struct Transition {
  int from = -1;  ///< inbound segment, placement index
  int to = -1;    ///< outbound segment, placement index
};

/// One way to equip a junction site: its price and the moves it enables.
struct SiteOption {
  double cost = 0.0;
  std::vector<Transition> moves;
};

/// Exhaustive cost of one placement subset: placement prices, inline motor
/// rebates, and the cheapest junction configuration under which every box
/// still reaches its output. Returns +infinity when no configuration works.
double subset_cost(const ReachGraph& graph, const Scene& scene,
                   const std::vector<int>& selected) {
  const auto& placements = graph.placements;
  double base = 0.0;
  for (int k : selected) base += placement_cost(placements[k], scene);

  // Selected arms per grid point; selected segments by span endpoint.
  std::map<int, int> arm_at;
  std::map<int, std::vector<int>> ins, outs;
  for (int k : selected) {
    const Placement& p = placements[k];
    if (p.dir < 0) {
      arm_at[p.grid_index] = k;
    } else {
      outs[p.grid_index].push_back(k);
      ins[p.head_grid_index].push_back(k);
    }
  }

  // Inline continuations: a segment flows straight into a same-direction,
  // same-type segment across the shared point; each pair shares one motor.
  std::vector<Transition> inline_moves;
  for (int k : selected) {
    const Placement& p = placements[k];
    if (p.dir < 0) continue;
    const auto next = outs.find(p.head_grid_index);
    if (next == outs.end()) continue;
    for (int j : next->second) {
      const Placement& c = placements[j];
      if (c.dir == p.dir && c.type_index == p.type_index) {
        inline_moves.push_back({k, j});
        base -= scene.costs.motor;
      }
    }
  }

  // Junction sites: points where selected segments both end and start. Each
  // offers no junction, a turning junction serving one chosen segment pair,
  // or a multi-way junction serving every pair; an arm on the point blocks
  // both powered kinds.
  std::vector<std::vector<SiteOption>> sites;
  for (const auto& [q, arriving] : ins) {
    const auto leaving = outs.find(q);
    if (leaving == outs.end()) continue;
    std::vector<SiteOption> options;
    options.push_back({0.0, {}});
    if (!arm_at.count(q)) {
      for (int u : arriving)
        for (int v : leaving->second)
          options.push_back(
              {scene.costs.turning_junction, {Transition{u, v}}});
      SiteOption multi{scene.costs.multiway_junction, {}};
      for (int u : arriving)
        for (int v : leaving->second) multi.moves.push_back({u, v});
      options.push_back(std::move(multi));
    }
    sites.push_back(std::move(options));
  }

  // Feasibility of one junction configuration: per box, breadth-first search
  // from the input over selected payload-sufficient placements.
  const int num_outputs = graph.num_outputs;
  auto feasible = [&](const std::vector<const SiteOption*>& config) {
    for (int i = 0; i < num_outputs; ++i) {
      const double weight = scene.outputs[i].weight;
      auto allowed = [&](int vertex) {
        if (!graph.is_placement_vertex(vertex)) return true;
        const int k = graph.placement_of_vertex(vertex);
        const Placement& p = placements[k];
        return std::binary_search(selected.begin(), selected.end(), k) &&
               scene.catalog[p.type_index].payload >= weight;
      };
      std::vector<std::vector<int>> adj(graph.num_vertices());
      for (const Arc& arc : graph.arcs)
        if (allowed(arc.src) && allowed(arc.dst)) adj[arc.src].push_back(arc.dst);
      auto add_move = [&](const Transition& t) {
        const int u = graph.placement_vertex(t.from);
        const int v = graph.placement_vertex(t.to);
        if (allowed(u) && allowed(v)) adj[u].push_back(v);
      };
      for (const Transition& t : inline_moves) add_move(t);
      for (const SiteOption* opt : config)
        for (const Transition& t : opt->moves) add_move(t);

      std::vector<char> seen(graph.num_vertices(), 0);
      std::vector<int> stack{graph.input_vertex()};
      seen[graph.input_vertex()] = 1;
      while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v : adj[u])
          if (!seen[v]) {
            seen[v] = 1;
            stack.push_back(v);
          }
      }
      if (!seen[graph.output_vertex(i)]) return false;
    }
    return true;
  };

  // Quick reject: if even the most permissive configuration (multi-way
  // everywhere) cannot connect the outputs, no cheaper one can.
  std::vector<const SiteOption*> config(sites.size());
  for (size_t s = 0; s < sites.size(); ++s) config[s] = &sites[s].back();
  if (!feasible(config)) return kInf;

  double best = kInf;
  std::function<void(size_t, double)> enumerate = [&](size_t s, double cost) {
    if (cost >= best) return;
    if (s == sites.size()) {
      if (feasible(config)) best = cost;
      return;
    }
    for (const SiteOption& opt : sites[s]) {
      config[s] = &opt;
      enumerate(s + 1, cost + opt.cost);
    }
  };
  enumerate(0, base);
  return best;
}

}  // namespace

OracleReport brute_force_layout(const ReachGraph& graph, const Scene& scene,
                                int cap) {
  const int num = static_cast<int>(graph.placements.size());
  if (num > cap)
    throw std::runtime_error("cap exceeded: " + std::to_string(num) +
                             " candidate placements, cap " +
                             std::to_string(cap));

  // One-or-none per occupancy slot; placements sharing a slot exclude each
  // other, so enumerating per slot never visits a colliding subset.
  std::map<long, std::vector<int>> by_slot;
  for (int k = 0; k < num; ++k)
    by_slot[slot_key(graph.placements[k], graph.nx)].push_back(k);
  std::vector<std::vector<int>> slots;
  slots.reserve(by_slot.size());
  for (auto& [key, list] : by_slot) slots.push_back(std::move(list));

  OracleReport report;
  std::vector<int> chosen;
  std::function<void(size_t)> enumerate = [&](size_t s) {
    if (s == slots.size()) {
      ++report.subsets_enumerated;
      std::vector<int> ordered = chosen;
      std::sort(ordered.begin(), ordered.end());
      const double cost = subset_cost(graph, scene, ordered);
      if (cost < report.optimal_cost - 1e-12) {
        report.optimal_cost = cost;
        report.feasible = true;
        report.best_placements = std::move(ordered);
      }
      return;
    }
    enumerate(s + 1);
    for (int k : slots[s]) {
      chosen.push_back(k);
      enumerate(s + 1);
      chosen.pop_back();
    }
  };
  enumerate(0);

  if (!report.feasible) report.optimal_cost = kInf;
  return report;
}

double VerifyReport::worst() const {
  return std::max({occupancy.violation, capacity.violation,
                   conservation.violation, junction.violation,
                   payload.violation, integrality.violation});
}

std::string VerifyReport::to_text() const {
  std::ostringstream out;
  auto line = [&](const char* family, const FamilyVerdict& f) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", f.violation);
    out << family << ": " << buf;
    if (!f.where.empty()) out << " at " << f.where;
    out << '\n';
  };
  line("occupancy", occupancy);
  line("capacity", capacity);
  line("conservation", conservation);
  line("junction", junction);
  line("payload", payload);
  line("integrality", integrality);
  return out.str();
}

VerifyReport verify_solution(const FlowNetwork& net, const MilpModel& model,
                             const Scene& scene, const Eigen::VectorXd& x) {
  if (x.size() != model.lp.num_vars)
    throw std::invalid_argument("verify_solution: solution has " +
                                std::to_string(x.size()) + " values, model " +
                                std::to_string(model.lp.num_vars));
  VerifyReport rep;
  const int num_arcs = model.num_arcs;
  const int num_boxes = model.num_boxes;
  auto s = [&](int a) { return x[model.s_var(a)]; };
  auto f = [&](int a, int i) { return x[model.f_var(a, i)]; };
  auto bump = [](FamilyVerdict& fam, double v,
                 const std::function<std::string()>& where) {
    if (v > fam.violation) {
      fam.violation = v;
      fam.where = where();
    }
  };

  // Occupancy: total selection per doubled-lattice location stays below one.
  std::map<long, double> occupancy;
  for (int a = 0; a < num_arcs; ++a)
    if (net.arcs[a].coor_key >= 0) occupancy[net.arcs[a].coor_key] += s(a);
  for (const auto& [key, sum] : occupancy)
    bump(rep.occupancy, sum - 1.0,
         [&] { return "location " + std::to_string(key); });

  // Capacity: flow rides only selected arcs.
  for (int a = 0; a < num_arcs; ++a)
    for (int i = 0; i < num_boxes; ++i)
      bump(rep.capacity, f(a, i) - s(a), [&] {
        return "arc " + std::to_string(a) + " box " + std::to_string(i);
      });

  // Conservation: per vertex and box, inflow minus outflow matches the
  // demand (-1 leaving the input, +1 entering the box's output, else 0).
  std::vector<std::vector<int>> in_arcs(net.num_vertices),
      out_arcs(net.num_vertices);
  for (int a = 0; a < num_arcs; ++a) {
    out_arcs[net.arcs[a].src].push_back(a);
    in_arcs[net.arcs[a].dst].push_back(a);
  }
  for (int v = 0; v < net.num_vertices; ++v)
    for (int i = 0; i < num_boxes; ++i) {
      double balance = 0.0;
      for (int a : in_arcs[v]) balance += f(a, i);
      for (int a : out_arcs[v]) balance -= f(a, i);
      double demand = 0.0;
      if (v == net.input_vertex()) demand = -1.0;
      if (v == net.output_vertex(i)) demand = 1.0;
      bump(rep.conservation, std::abs(balance - demand), [&] {
        return "vertex " + std::to_string(v) + " box " + std::to_string(i);
      });
    }

  // Junction coupling: ports need their gadget, inline motors need both
  // segments and at most one per segment side, and a turning junction pins
  // exactly one port on each side.
  std::vector<int> aux_of(net.num_placements, -1);
  for (int a = 0; a < num_arcs; ++a)
    if (net.arcs[a].kind == ArcKind::robot_aux)
      aux_of[net.arcs[a].placement] = a;
  std::map<int, double> inline_by_parent, inline_by_child;
  std::vector<double> gadget_in(net.gadgets.size(), 0.0),
      gadget_out(net.gadgets.size(), 0.0);
  for (int a = 0; a < num_arcs; ++a) {
    const NetArc& arc = net.arcs[a];
    if (arc.kind == ArcKind::junction_port) {
      bump(rep.junction, s(a) - s(net.gadgets[arc.gadget].aux_arc),
           [&] { return "port arc " + std::to_string(a); });
      if (arc.dst == net.gadgets[arc.gadget].vplus)
        gadget_in[arc.gadget] += s(a);
      else
        gadget_out[arc.gadget] += s(a);
    } else if (arc.kind == ArcKind::inline_motor) {
      bump(rep.junction, s(a) - s(aux_of[arc.inline_parent]), [&] {
        return "inline arc " + std::to_string(a) + " upstream";
      });
      bump(rep.junction, s(a) - s(aux_of[arc.inline_child]), [&] {
        return "inline arc " + std::to_string(a) + " downstream";
      });
      inline_by_parent[arc.inline_parent] += s(a);
      inline_by_child[arc.inline_child] += s(a);
    }
  }
  for (const auto& [segment, sum] : inline_by_parent)
    bump(rep.junction, sum - 1.0, [&] {
      return "inline motors downstream of segment " + std::to_string(segment);
    });
  for (const auto& [segment, sum] : inline_by_child)
    bump(rep.junction, sum - 1.0, [&] {
      return "inline motors upstream of segment " + std::to_string(segment);
    });
  for (size_t g = 0; g < net.gadgets.size(); ++g) {
    if (net.gadgets[g].multiway) continue;
    const double aux = s(net.gadgets[g].aux_arc);
    bump(rep.junction, std::abs(gadget_in[g] - aux),
         [&] { return "turning gadget " + std::to_string(g) + " inbound"; });
    bump(rep.junction, std::abs(gadget_out[g] - aux),
         [&] { return "turning gadget " + std::to_string(g) + " outbound"; });
  }

  // Payload: flow of a box never rides an arc rated below its weight.
  for (int a = 0; a < num_arcs; ++a)
    for (int i = 0; i < num_boxes; ++i)
      if (net.arcs[a].payload < scene.outputs[i].weight)
        bump(rep.payload, f(a, i), [&] {
          return "arc " + std::to_string(a) + " box " + std::to_string(i);
        });

  // Integrality of every selection variable.
  for (int v : model.binaries)
    bump(rep.integrality, std::abs(x[v] - std::round(x[v])),
         [&] { return model.lp.var_names[v]; });

  return rep;
}

Eigen::VectorXd finite_diff_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& point, double step) {
  Eigen::VectorXd grad(point.size());
  Eigen::VectorXd probe = point;
  for (int i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = f(probe);
    probe[i] = point[i] - step;
    const double down = f(probe);
    probe[i] = point[i];
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace layopt
