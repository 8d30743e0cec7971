#pragma once

#include "layopt/core.hpp"

namespace layopt {

/// One of the eight lattice directions, multiples of 45 degrees, 0 = +x,
/// counter-clockwise.
using DirIndex = int;
constexpr int kNumDirections = 8;

/// Lattice step for a direction at the given pitch. Diagonal steps move by
/// (spacing, spacing), so diagonal belt spans have length spacing * sqrt(2).
Vec2 direction_step(DirIndex dir, double spacing);

/// Distance from point p to the closed segment [a, b].
double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

/// Whether two closed annuli (center, [rmin, rmax]) share at least one point.
bool annuli_intersect(const Vec2& c1, double rmin1, double rmax1,
                      const Vec2& c2, double rmin2, double rmax2);

/// Whether the closed annulus around `center` meets the segment [a, b].
bool annulus_meets_segment(const Vec2& center, double rmin, double rmax,
                           const Vec2& a, const Vec2& b);

/// Party to a handover feasibility test: an io port, an arm base, or a belt
/// span. Ports have no base footprint; belts contribute no clearance radius
/// of their own (they sit below the arms), so arm-belt collision only keeps
/// the arm base off the belt centerline.
struct HandoverParty {
  enum class Kind { io, arm, belt };
  Kind kind = Kind::io;
  Vec2 point{0.0, 0.0};  ///< io position, arm base, or belt span start
  Vec2 head{0.0, 0.0};   ///< belt span end; unused otherwise
  double reach_min = 0.0;
  double reach_max = 0.0;
  double clearance = 0.0;
};

HandoverParty io_party(const Vec2& pos);
HandoverParty arm_party(const RobotType& type, const Vec2& base);
HandoverParty belt_party(const Vec2& anchor, const Vec2& head);

/// Symmetric kinematic handover predicate. True when the pair can exchange a
/// box without base collision: arm-arm needs intersecting reach annuli and
/// base distance at least the sum of clearance radii; arm-io needs the port
/// inside the annulus; arm-belt needs the annulus to meet the span while the
/// base keeps the arm's clearance off the centerline. io-io, belt-io and
/// belt-belt pairs are never direct (belts join through junctions only).
bool can_hand_over(const HandoverParty& a, const HandoverParty& b);

/// Candidate element: a catalog type anchored at a lattice point. Belt
/// placements carry a direction; their span runs one lattice step from the
/// anchor toward `head`.
struct Placement {
  int grid_index = -1;
  int type_index = -1;
  Vec2 position{0.0, 0.0};
  DirIndex dir = -1;        ///< belts 0..7, arms -1
  Vec2 head{0.0, 0.0};      ///< belts: far end of the span; arms: == position
  int head_grid_index = -1; ///< belts: lattice index of the span end
};

/// Hardware price of one placement: the catalog cost for arms, and
/// belt_per_meter * span length + one motor for belt segments.
double placement_cost(const Placement& p, const Scene& scene);

struct Arc {
  int src = -1;
  int dst = -1;
};

/// Reachability graph. Vertex ids: 0 = input, 1..N = outputs, then one
/// vertex per placement in placement order. Arcs out of the input and into
/// the outputs are directed; placement-placement arcs appear in both
/// directions whenever the symmetric predicate holds.
struct ReachGraph {
  int num_outputs = 0;
  int nx = 0, ny = 0;
  double spacing = 0.0;
  std::vector<Vec2> points;          ///< candidate lattice, row-major
  std::vector<Placement> placements;
  std::vector<Arc> arcs;
  std::vector<std::vector<int>> arcs_out;  ///< per vertex, arc ids
  std::vector<std::vector<int>> arcs_in;
  std::vector<std::string> warnings;

  int num_vertices() const {
    return 1 + num_outputs + static_cast<int>(placements.size());
  }
  int input_vertex() const { return 0; }
  int output_vertex(int i) const { return 1 + i; }
  int placement_vertex(int k) const { return 1 + num_outputs + k; }
  bool is_placement_vertex(int v) const { return v > num_outputs; }
  int placement_of_vertex(int v) const { return v - 1 - num_outputs; }
};

/// Builds placements (arms per grid point and type; belt segments per grid
/// point, belt type and in-floor direction) and all handover arcs. Emits
/// warnings when the input has no outgoing arc or an output no incoming arc.
ReachGraph build_reachability_graph(const Scene& scene);

}  // namespace layopt
