#include "layopt/reach.hpp"

#include <algorithm>
#include <cmath>

namespace layopt {

Vec2 direction_step(DirIndex dir, double spacing) {
  static const int dx[kNumDirections] = {1, 1, 0, -1, -1, -1, 0, 1};
  static const int dy[kNumDirections] = {0, 1, 1, 1, 0, -1, -1, -1};
  return Vec2(dx[dir] * spacing, dy[dir] * spacing);
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

bool annuli_intersect(const Vec2& c1, double rmin1, double rmax1,
                      const Vec2& c2, double rmin2, double rmax2) {
  const double d = (c1 - c2).norm();
  // The distances from c1 achievable by points of annulus 2 form the
  // interval [dist(d, [rmin2, rmax2]), d + rmax2]; intersect it with
  // [rmin1, rmax1].
  return d <= rmax1 + rmax2 && d + rmax2 >= rmin1 && d + rmax1 >= rmin2;
}

bool annulus_meets_segment(const Vec2& center, double rmin, double rmax,
                           const Vec2& a, const Vec2& b) {
  const double dmin = point_segment_distance(center, a, b);
  const double dmax = std::max((center - a).norm(), (center - b).norm());
  return dmin <= rmax && dmax >= rmin;
}

HandoverParty io_party(const Vec2& pos) {
  HandoverParty p;
  p.kind = HandoverParty::Kind::io;
  p.point = pos;
  return p;
}

HandoverParty arm_party(const RobotType& type, const Vec2& base) {
  HandoverParty p;
  p.kind = HandoverParty::Kind::arm;
  p.point = base;
  p.reach_min = type.reach_min;
  p.reach_max = type.reach_max;
  p.clearance = type.clearance_radius;
  return p;
}

HandoverParty belt_party(const Vec2& anchor, const Vec2& head) {
  HandoverParty p;
  p.kind = HandoverParty::Kind::belt;
  p.point = anchor;
  p.head = head;
  return p;
}

bool can_hand_over(const HandoverParty& a, const HandoverParty& b) {
  using Kind = HandoverParty::Kind;
  const HandoverParty* arm = nullptr;
  const HandoverParty* other = nullptr;
  if (a.kind == Kind::arm) {
    arm = &a;
    other = &b;
  } else if (b.kind == Kind::arm) {
    arm = &b;
    other = &a;
  } else {
    return false;  // io-io, io-belt and belt-belt are never direct
  }
  switch (other->kind) {
    case Kind::arm: {
      const double d = (arm->point - other->point).norm();
      if (d < arm->clearance + other->clearance) return false;
      return annuli_intersect(arm->point, arm->reach_min, arm->reach_max,
                              other->point, other->reach_min,
                              other->reach_max);
    }
    case Kind::io: {
      const double d = (arm->point - other->point).norm();
      if (d < arm->clearance) return false;
      return d >= arm->reach_min && d <= arm->reach_max;
    }
    case Kind::belt: {
      if (point_segment_distance(arm->point, other->point, other->head) <
          arm->clearance)
        return false;
      return annulus_meets_segment(arm->point, arm->reach_min, arm->reach_max,
                                   other->point, other->head);
    }
  }
  return false;
}

double placement_cost(const Placement& p, const Scene& scene) {
  const RobotType& type = scene.catalog[p.type_index];
  if (type.kind == RobotKind::arm) return type.cost;
  return scene.costs.belt_per_meter * (p.head - p.position).norm() +
         scene.costs.motor;
}

namespace {

HandoverParty placement_party(const Scene& scene, const Placement& pl) {
  const RobotType& type = scene.catalog[pl.type_index];
  return type.kind == RobotKind::arm ? arm_party(type, pl.position)
                                     : belt_party(pl.position, pl.head);
}

}  // namespace

ReachGraph build_reachability_graph(const Scene& scene) {
  ReachGraph g;
  g.num_outputs = static_cast<int>(scene.outputs.size());
  g.spacing = scene.spacing;
  g.points = grid_points(scene.floor_min, scene.floor_max, scene.spacing);
  {
    const Vec2 span = scene.floor_max - scene.floor_min;
    g.nx = static_cast<int>(std::floor(span.x() / scene.spacing + 1e-9)) + 1;
    g.ny = static_cast<int>(std::floor(span.y() / scene.spacing + 1e-9)) + 1;
  }

  // Arm placements first (point-major, catalog order), then belt segments
  // (point-major, catalog order, direction order), skipping spans whose far
  // end leaves the lattice.
  for (int p = 0; p < static_cast<int>(g.points.size()); ++p)
    for (int t = 0; t < static_cast<int>(scene.catalog.size()); ++t) {
      if (scene.catalog[t].kind != RobotKind::arm) continue;
      Placement pl;
      pl.grid_index = p;
      pl.type_index = t;
      pl.position = g.points[p];
      pl.head = pl.position;
      g.placements.push_back(pl);
    }
  for (int p = 0; p < static_cast<int>(g.points.size()); ++p) {
    const int ix = p % g.nx;
    const int iy = p / g.nx;
    for (int t = 0; t < static_cast<int>(scene.catalog.size()); ++t) {
      if (scene.catalog[t].kind != RobotKind::belt) continue;
      for (DirIndex dir = 0; dir < kNumDirections; ++dir) {
        static const int dx[kNumDirections] = {1, 1, 0, -1, -1, -1, 0, 1};
        static const int dy[kNumDirections] = {0, 1, 1, 1, 0, -1, -1, -1};
        const int hx = ix + dx[dir];
        const int hy = iy + dy[dir];
        if (hx < 0 || hx >= g.nx || hy < 0 || hy >= g.ny) continue;
        Placement pl;
        pl.grid_index = p;
        pl.type_index = t;
        pl.position = g.points[p];
        pl.dir = dir;
        pl.head_grid_index = hy * g.nx + hx;
        pl.head = g.points[pl.head_grid_index];
        g.placements.push_back(pl);
      }
    }
  }

  const int n_pl = static_cast<int>(g.placements.size());
  std::vector<HandoverParty> parties(n_pl);
  for (int k = 0; k < n_pl; ++k)
    parties[k] = placement_party(scene, g.placements[k]);

  const HandoverParty input = io_party(scene.input);
  std::vector<HandoverParty> outputs;
  outputs.reserve(scene.outputs.size());
  for (const auto& out : scene.outputs) outputs.push_back(io_party(out.pos));

  auto add_arc = [&](int src, int dst) {
    g.arcs.push_back({src, dst});
  };
  for (int k = 0; k < n_pl; ++k)
    if (can_hand_over(input, parties[k])) add_arc(0, g.placement_vertex(k));
  for (int i = 0; i < n_pl; ++i)
    for (int j = 0; j < n_pl; ++j) {
      if (i == j) continue;
      // The predicate is symmetric; evaluate unordered pairs once and emit
      // both directions.
      if (i < j && can_hand_over(parties[i], parties[j])) {
        add_arc(g.placement_vertex(i), g.placement_vertex(j));
        add_arc(g.placement_vertex(j), g.placement_vertex(i));
      }
    }
  for (int k = 0; k < n_pl; ++k)
    for (int o = 0; o < g.num_outputs; ++o)
      if (can_hand_over(parties[k], outputs[o]))
        add_arc(g.placement_vertex(k), g.output_vertex(o));

  g.arcs_out.assign(g.num_vertices(), {});
  g.arcs_in.assign(g.num_vertices(), {});
  for (int a = 0; a < static_cast<int>(g.arcs.size()); ++a) {
    g.arcs_out[g.arcs[a].src].push_back(a);
    g.arcs_in[g.arcs[a].dst].push_back(a);
  }

  if (g.arcs_out[0].empty()) g.warnings.push_back("input isolated");
  for (int o = 0; o < g.num_outputs; ++o)
    if (g.arcs_in[g.output_vertex(o)].empty())
      g.warnings.push_back("output " + std::to_string(o) + " unreachable");
  return g;
}

}  // namespace layopt
