#pragma once

#include "layopt/netmodel.hpp"

#include <functional>
#include <string>

namespace layopt {

/// Ground-truth optimum from exhaustive enumeration. Placements are grouped
/// into occupancy slots (same doubled-lattice key); the search tries one or
/// none per slot, so `subsets_enumerated` equals the product over slots of
/// (choices + 1).
struct OracleReport {
  bool feasible = false;
  double optimal_cost = kInf;
  std::vector<int> best_placements;  ///< one optimal subset, ascending indices
  long subsets_enumerated = 0;
};

/// Exhaustive minimum-cost layout search over the reachability graph. For
/// each placement subset, every junction configuration at belt meeting points
/// (none, turning with a chosen segment pair, or multi-way) is costed, inline
/// motor rebates are applied to collinear same-type continuations, and a
/// subset is feasible when a payload-respecting path connects the input to
/// every output. Deliberately independent of the flow-network compilation:
/// it reads only the reachability graph and the scene prices.
/// Throws std::runtime_error("cap exceeded ...") when the graph has more
/// than `cap` candidate placements.
OracleReport brute_force_layout(const ReachGraph& graph, const Scene& scene,
                                int cap = 14);

/// Largest violation found in one constraint family, with the identity of
/// the offending constraint ("vertex 7 box 1", "arc 12 box 0", ...).
struct FamilyVerdict {
  double violation = 0.0;
  std::string where;
};

/// Per-family residuals of a candidate solution, recomputed from the network
/// structure rather than from the compiled rows.
struct VerifyReport {
  FamilyVerdict occupancy;
  FamilyVerdict capacity;
  FamilyVerdict conservation;
  FamilyVerdict junction;
  FamilyVerdict payload;
  FamilyVerdict integrality;

  double worst() const;
  bool ok(double tol = 1e-6) const { return worst() <= tol; }
  /// One "family: violation [where]" line per family, for logs and CI.
  std::string to_text() const;
};

/// Recomputes every constraint of the selection/flow program directly from
/// the network: occupancy sums per location, capacity f <= s, per-vertex
/// flow balance, junction coupling (ports, inline-motor sides, turning
/// cardinality), payload-blocked flows, and integrality of the selection
/// variables. `x` must assign all model variables.
VerifyReport verify_solution(const FlowNetwork& net, const MilpModel& model,
                             const Scene& scene, const Eigen::VectorXd& x);

/// Central finite differences of `f` around `point` with the given step.
Eigen::VectorXd finite_diff_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& point, double step = 1e-6);

}  // namespace layopt
