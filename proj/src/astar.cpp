#include "layopt/astar.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <queue>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

namespace layopt {

namespace {

struct BlobHash {
  size_t operator()(const std::vector<int>& v) const {
    size_t h = 1469598103934665603ull;
    for (int x : v) {
      h ^= static_cast<size_t>(static_cast<unsigned>(x));
      h *= 1099511628211ull;
    }
    return h;
  }
};

/// Queue entry. Orders by f, then the smaller heuristic, then generation
/// order, so ties never depend on container internals.
struct OpenNode {
  double f = 0.0;
  double h = 0.0;
  long seq = 0;
  double g = 0.0;
  std::vector<int> blob;
};

struct OpenNodeAfter {
  bool operator()(const OpenNode& a, const OpenNode& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.h != b.h) return a.h > b.h;
    return a.seq > b.seq;
  }
};

double seconds_since(
    const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

}  // namespace

double astar_heuristic(const std::vector<int>& blob, const Scene& scene,
                       const ReachGraph& graph, double reach) {
  const int n_out = static_cast<int>(scene.outputs.size());
  const double span = 2.0 * reach;
  if (n_out == 0 || !(span > 0.0)) return 0.0;
  int worst = 0;
  for (int i = 0; i < n_out; ++i) {
    bool covered = false;
    for (int arc_id : graph.arcs_in[graph.output_vertex(i)]) {
      const int src = graph.arcs[arc_id].src;
      if (!graph.is_placement_vertex(src)) continue;
      if (std::binary_search(blob.begin(), blob.end(),
                             graph.placement_of_vertex(src))) {
        covered = true;
        break;
      }
    }
    if (covered) continue;
    const Vec2& target = scene.outputs[i].pos;
    double dist = (target - scene.input).norm();
    for (int k : blob) {
      const Placement& p = graph.placements[k];
      dist = std::min(dist, point_segment_distance(target, p.position, p.head));
    }
    const int units =
        std::max(1, static_cast<int>(std::ceil(dist / span - 1e-12)));
    worst = std::max(worst, units);
  }
  return static_cast<double>(worst);
}

namespace {

/// True when every output receives a handover arc from some selected
/// placement. `feeders[i]` lists, sorted, the placements arcing into output i.
bool covers_all_outputs(const std::vector<int>& blob,
                        const std::vector<std::vector<int>>& feeders) {
  for (const std::vector<int>& f : feeders) {
    bool hit = false;
    size_t a = 0, b = 0;
    while (a < blob.size() && b < f.size()) {
      if (blob[a] == f[b]) {
        hit = true;
        break;
      }
      if (blob[a] < f[b]) {
        ++a;
      } else {
        ++b;
      }
    }
    if (!hit) return false;
  }
  return true;
}

/// Fewest-hop input-to-output walk over the selected placements, ties toward
/// the lexicographically smallest vertex sequence (the same convention the
/// network-side layout extraction uses).
std::vector<PathStep> trace_path(const ReachGraph& graph, const Scene& scene,
                                 const std::vector<int>& blob, int box) {
  const int n = graph.num_vertices();
  const int target = graph.output_vertex(box);
  std::vector<char> allowed(n, 0);
  allowed[graph.input_vertex()] = 1;
  allowed[target] = 1;
  for (int k : blob) allowed[graph.placement_vertex(k)] = 1;

  // Hop counts toward the output, walked greedily from the input.
  std::vector<int> rdist(n, -1);
  std::deque<int> queue;
  rdist[target] = 0;
  queue.push_back(target);
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int arc_id : graph.arcs_in[v]) {
      const int u = graph.arcs[arc_id].src;
      if (!allowed[u] || rdist[u] >= 0) continue;
      rdist[u] = rdist[v] + 1;
      queue.push_back(u);
    }
  }

  std::vector<PathStep> path;
  path.push_back({PathStep::Kind::input, -1});
  int cur = graph.input_vertex();
  while (cur != target) {
    int next = -1;
    for (int arc_id : graph.arcs_out[cur]) {
      const int dst = graph.arcs[arc_id].dst;
      if (!allowed[dst] || rdist[dst] != rdist[cur] - 1) continue;
      if (next == -1 || dst < next) next = dst;
    }
    if (next == -1) throw std::runtime_error("disconnected output in trace");
    cur = next;
    if (cur == target) {
      path.push_back({PathStep::Kind::output, box});
    } else {
      const int k = graph.placement_of_vertex(cur);
      const RobotType& type = scene.catalog[graph.placements[k].type_index];
      path.push_back({type.kind == RobotKind::arm ? PathStep::Kind::arm
                                                  : PathStep::Kind::belt,
                      k});
    }
  }
  return path;
}

Layout layout_from_blob(const ReachGraph& graph, const Scene& scene,
                        const std::vector<int>& blob, double cost) {
  Layout layout;
  layout.total_cost = cost;
  for (int k : blob) {
    const Placement& p = graph.placements[k];
    if (scene.catalog[p.type_index].kind == RobotKind::arm) {
      layout.arms.push_back({k, p.type_index, p.position});
    } else {
      layout.belts.push_back({k, p.type_index, p.dir, p.position, p.head});
    }
  }
  const int n_out = static_cast<int>(scene.outputs.size());
  for (int i = 0; i < n_out; ++i) {
    layout.paths.push_back(trace_path(graph, scene, blob, i));
  }
  return layout;
}

}  // namespace

AstarResult astar_layout(const Scene& scene, const ReachGraph& graph,
                         const AstarParams& params) {
  const auto start = std::chrono::steady_clock::now();
  AstarResult res;

  // One chain element extends the covered span by at most twice the longest
  // arm reach; with belts in the catalog a diagonal segment may extend it
  // further when the pitch is coarse.
  double reach = 0.0;
  double unit_price = kInf;
  bool have_belt = false;
  for (const RobotType& type : scene.catalog) {
    if (type.kind == RobotKind::arm) {
      reach = std::max(reach, type.reach_max);
      unit_price = std::min(unit_price, type.cost);
    } else {
      have_belt = true;
      unit_price = std::min(unit_price,
                            scene.costs.belt_per_meter * scene.spacing +
                                scene.costs.motor);
    }
  }
  if (have_belt) {
    reach = std::max(reach, scene.spacing * std::sqrt(2.0) / 2.0);
  }
  if (!std::isfinite(unit_price) || unit_price < 0.0) unit_price = 0.0;

  // Feeders per output, and a reachability precheck over the whole graph:
  // an output no selection could ever serve makes the instance infeasible.
  const int n_out = static_cast<int>(scene.outputs.size());
  std::vector<std::vector<int>> feeders(n_out);
  for (int i = 0; i < n_out; ++i) {
    for (int arc_id : graph.arcs_in[graph.output_vertex(i)]) {
      const int src = graph.arcs[arc_id].src;
      if (graph.is_placement_vertex(src)) {
        feeders[i].push_back(graph.placement_of_vertex(src));
      }
    }
    std::sort(feeders[i].begin(), feeders[i].end());
  }
  {
    std::vector<char> seen_v(graph.num_vertices(), 0);
    std::deque<int> queue;
    seen_v[graph.input_vertex()] = 1;
    queue.push_back(graph.input_vertex());
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      for (int arc_id : graph.arcs_out[v]) {
        const int dst = graph.arcs[arc_id].dst;
        if (!seen_v[dst]) {
          seen_v[dst] = 1;
          queue.push_back(dst);
        }
      }
    }
    for (int i = 0; i < n_out; ++i) {
      if (!seen_v[graph.output_vertex(i)]) {
        res.status = AstarStatus::infeasible;
        res.runtime_s = seconds_since(start);
        return res;
      }
    }
  }

  std::priority_queue<OpenNode, std::vector<OpenNode>, OpenNodeAfter> open;
  std::unordered_set<std::vector<int>, BlobHash> pushed;
  const double byte_cap = params.memory_limit_mb * 1024.0 * 1024.0;
  double bytes = 0.0;
  long seq = 0;

  const auto push_state = [&](std::vector<int> blob, double g) -> bool {
    if (!pushed.insert(blob).second) return true;  // already queued once
    bytes += 2.0 * (sizeof(int) * static_cast<double>(blob.size())) + 120.0;
    if (bytes > byte_cap) return false;
    const double h =
        astar_heuristic(blob, scene, graph, reach) * unit_price;
    open.push({g + h, h, seq++, g, std::move(blob)});
    ++res.generated;
    return true;
  };

  if (!push_state({}, 0.0)) {
    res.status = AstarStatus::out_of_memory;
    res.runtime_s = seconds_since(start);
    return res;
  }

  std::vector<char> in_blob(graph.placements.size(), 0);
  while (!open.empty()) {
    if (seconds_since(start) > params.time_limit_s) {
      res.status = AstarStatus::timeout;
      res.runtime_s = seconds_since(start);
      return res;
    }
    const OpenNode node = open.top();
    open.pop();
    ++res.expanded;

    if (covers_all_outputs(node.blob, feeders)) {
      res.status = AstarStatus::solved;
      res.cost = node.g;
      res.layout = layout_from_blob(graph, scene, node.blob, node.g);
      res.runtime_s = seconds_since(start);
      return res;
    }

    // Successors: one more placement the reachability graph connects to the
    // input or to the current selection.
    for (int k : node.blob) in_blob[k] = 1;
    std::vector<int> candidates;
    const auto scan_vertex = [&](int v) {
      for (int arc_id : graph.arcs_out[v]) {
        const int dst = graph.arcs[arc_id].dst;
        if (!graph.is_placement_vertex(dst)) continue;
        const int k = graph.placement_of_vertex(dst);
        if (!in_blob[k]) candidates.push_back(k);
      }
    };
    scan_vertex(graph.input_vertex());
    for (int k : node.blob) scan_vertex(graph.placement_vertex(k));
    for (int k : node.blob) in_blob[k] = 0;
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());

    for (int k : candidates) {
      std::vector<int> child = node.blob;
      child.insert(std::upper_bound(child.begin(), child.end(), k), k);
      const double g = node.g + placement_cost(graph.placements[k], scene);
      if (!push_state(std::move(child), g)) {
        res.status = AstarStatus::out_of_memory;
        res.runtime_s = seconds_since(start);
        return res;
      }
    }
  }

  res.status = AstarStatus::infeasible;
  res.runtime_s = seconds_since(start);
  return res;
}

}  // namespace layopt
