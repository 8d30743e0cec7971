#pragma once

#include "layopt/netmodel.hpp"

#include <vector>

namespace layopt {

enum class AstarStatus { solved, infeasible, timeout, out_of_memory };

struct AstarParams {
  double time_limit_s = 300.0;
  double memory_limit_mb = 1024.0;  ///< open + closed set budget
};

struct AstarResult {
  AstarStatus status = AstarStatus::infeasible;
  Layout layout;       ///< valid when status == solved
  double cost = kInf;  ///< total element cost of the solved layout
  long expanded = 0;   ///< states taken off the queue
  long generated = 0;  ///< states pushed onto the queue
  double runtime_s = 0.0;
};

/// Admissible count of elements a partial selection still needs. Outputs the
/// blob already hands over to contribute zero. Every other output needs at
/// least ceil(d / (2 * reach)) more elements, never fewer than one, where d
/// is its straight-line distance to the nearest selected element (or to the
/// input port when that is nearer): one chain element extends the covered
/// span by at most twice its reach. The maximum over outputs is returned.
double astar_heuristic(const std::vector<int>& blob, const Scene& scene,
                       const ReachGraph& graph, double reach);

/// Search baseline over growing placement sets: the start state selects
/// nothing, each successor adds one placement the reachability graph
/// connects to the input or to the current set, and a state is a goal once
/// every output port can hand over from some selected placement. States are
/// ordered by selection cost plus heuristic (ties prefer the smaller
/// heuristic, then generation order); duplicate sets are pruned, which is
/// safe because a set's cost does not depend on the insertion order. Box
/// payloads and belt-to-belt junctions are outside this baseline's model:
/// belts participate only through arm handovers.
AstarResult astar_layout(const Scene& scene, const ReachGraph& graph,
                         const AstarParams& params = {});

}  // namespace layopt
