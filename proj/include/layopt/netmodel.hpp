#pragma once

#include "layopt/milp.hpp"
#include "layopt/reach.hpp"

#include <string>
#include <vector>

namespace layopt {

/// Role of an arc in the flow network.
enum class ArcKind {
  original,     ///< carries a handover from the reachability graph; uncosted
  robot_aux,    ///< split arc of an arm or belt placement; weight = its cost
  inline_motor, ///< merges two collinear same-direction belts; weight < 0
  multiway_aux, ///< multi-way junction selection arc
  turning_aux,  ///< turning junction selection arc
  junction_port ///< uncosted arc between a belt copy and a junction vertex
};

struct NetArc {
  int src = -1;
  int dst = -1;
  ArcKind kind = ArcKind::original;
  double weight = 0.0;    ///< objective coefficient on the selection variable
  double payload = kInf;  ///< max box weight the arc may carry
  long coor_key = -1;     ///< occupancy group (doubled-lattice point), -1 none
  int placement = -1;     ///< robot_aux: index into placements
  int gadget = -1;        ///< junction arcs: index into gadgets
  int inline_parent = -1; ///< inline_motor: upstream belt placement
  int inline_child = -1;  ///< inline_motor: downstream belt placement
};

/// Multi-way or turning junction gadget instantiated at one grid point.
struct JunctionGadget {
  int grid_index = -1;
  bool multiway = true;  ///< false = turning
  int vplus = -1;        ///< collects flow from inbound belt segments
  int vminus = -1;       ///< feeds outbound belt segments
  int aux_arc = -1;      ///< the costed selection arc vplus -> vminus
};

/// Reachability graph after vertex splitting: io vertices keep ids 0..N,
/// placement k becomes an in-copy/out-copy pair joined by its auxiliary arc,
/// and junction gadgets append their own vertex pairs.
struct FlowNetwork {
  int num_outputs = 0;
  int num_vertices = 0;
  int num_placements = 0;
  std::vector<NetArc> arcs;
  std::vector<Placement> placements;  ///< copied from the reachability graph
  std::vector<Vec2> points;           ///< lattice, for junction positions
  std::vector<JunctionGadget> gadgets;

  int input_vertex() const { return 0; }
  int output_vertex(int i) const { return 1 + i; }
  int in_copy(int placement) const { return 1 + num_outputs + 2 * placement; }
  int out_copy(int placement) const { return 2 + num_outputs + 2 * placement; }
};

/// Replaces every placement vertex with an in/out copy joined by an auxiliary
/// arc whose weight is the element cost: the catalog cost for arms, and
/// belt_per_meter * segment length + motor for belt segments. Original arcs
/// are rewired to the appropriate copies; io vertices are untouched.
FlowNetwork split_vertices(const ReachGraph& graph, const Scene& scene);

/// Adds junction machinery at each grid point touched by belt segments:
/// an inline-motor arc per collinear same-direction adjacent pair (weight
/// -motor, it rebates the shared motor), plus one multi-way and one turning
/// gadget wherever segments both enter and leave the point.
void add_junction_gadgets(FlowNetwork& net, const ReachGraph& graph,
                          const Scene& scene);

/// Compiled optimization model plus the maps back into the network.
struct MilpModel {
  LinearProgram lp;
  std::vector<int> binaries;  ///< all selection variables
  int num_arcs = 0;
  int num_boxes = 0;

  int s_var(int arc) const { return arc; }
  int f_var(int arc, int box) const {
    return num_arcs + arc * num_boxes + box;
  }
};

/// Builds the selection + multicommodity-flow program:
///   minimize    sum of weight_a * s_a
///   subject to  occupancy: at most one costed element per location,
///               capacity:  f_{a,i} <= s_a on every arc and box,
///               balance:   per vertex and box, inflow - outflow equals
///                          -1 at the input, +1 at the box's output, else 0,
///               junction coupling rows from the gadget construction.
/// Selection variables on original arcs carry no cost and appear in no
/// selection row, so they are fixed to 1 (argmin-preserving); flows whose arc
/// payload is below the box weight are fixed to 0 through their bounds.
MilpModel compile_milp(const FlowNetwork& net, const Scene& scene);

/// One step of a delivery path at the element level.
struct PathStep {
  enum class Kind { input, output, arm, belt, junction };
  Kind kind;
  int index = -1;  ///< placement index, gadget index, or output index
};

struct Layout {
  struct Arm {
    int placement;
    int type_index;
    Vec2 position;
  };
  struct Belt {
    int placement;
    int type_index;
    int dir;
    Vec2 anchor;
    Vec2 head;
  };
  struct Junction {
    enum class Kind { multiway, turning, inline_motor };
    Kind kind;
    Vec2 position;
    int network_arc;  ///< the selected arc that established it
  };

  std::vector<Arm> arms;
  std::vector<Belt> belts;
  std::vector<Junction> junctions;
  std::vector<std::vector<PathStep>> paths;  ///< one per box
  double total_cost = 0.0;
};

/// Reads the selected elements out of an integral solution and traces each
/// box's delivery path: fewest flow hops from input to its output over the
/// arcs carrying that box's flow, ties broken toward the lexicographically
/// smallest vertex-id sequence. Throws std::runtime_error("disconnected
/// output ...") if a box's flow does not reach its output, which indicates an
/// infeasible or corrupted solution.
Layout extract_layout(const FlowNetwork& net, const MilpModel& model,
                      const Eigen::VectorXd& x, const Scene& scene);

/// Serializes a program in the LP-style text format understood by
/// parse_lp_text (sections Minimize / Subject To / Bounds / Binaries / End).
std::string write_lp_text(const LinearProgram& lp,
                          const std::vector<int>& binaries);

}  // namespace layopt
