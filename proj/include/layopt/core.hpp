#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace layopt {

using Vec2 = Eigen::Vector2d;

/// Kind of catalog entry: stationary arm or directed conveyor-belt segment.
enum class RobotKind { arm, belt };

/// One catalog entry. An arm can grasp anywhere in the closed annulus
/// [reach_min, reach_max] around its base. A belt entry stands for directed
/// segments spanning one grid step in one of eight 45-degree directions;
/// its price is cost-per-meter times length plus one motor (see CostTable),
/// so `cost` is ignored for belts.
struct RobotType {
  std::string id;
  RobotKind kind = RobotKind::arm;
  double cost = 0.0;
  double reach_min = 0.0;
  double reach_max = 0.0;
  double clearance_radius = 0.0;
  double payload = 0.0;  ///< heaviest box the element may carry, kg
};

/// Prices for belt hardware and junctions. Arm prices live on RobotType.
struct CostTable {
  double belt_per_meter = 0.2;
  double motor = 0.1;
  double multiway_junction = 0.1;
  double turning_junction = 0.05;
};

/// One delivery target: a drop-off position and the box weight routed to it.
struct OutputPort {
  Vec2 pos{0.0, 0.0};
  double weight = 1.0;
};

/// Problem instance: rectangular floor, candidate-grid pitch, one input
/// port, N output ports, and the hardware catalog with its price table.
struct Scene {
  Vec2 floor_min{0.0, 0.0};
  Vec2 floor_max{0.0, 0.0};
  double spacing = 0.5;
  Vec2 input{0.0, 0.0};
  std::vector<OutputPort> outputs;
  std::vector<RobotType> catalog;
  CostTable costs;
};

/// Thrown by scene parsing/validation; `field` is the dotted path of the
/// offending entry (e.g. "outputs[1].pos").
class SceneError : public std::runtime_error {
 public:
  SceneError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Default arm/belt catalog: UR5e, IRB4600 and a generic belt segment kind.
std::vector<RobotType> default_catalog();

/// Candidate lattice over the floor rectangle: row-major (y outer, x inner),
/// pitch `spacing`, both boundaries included. Degenerate spans (min == max on
/// an axis) yield a single row/column.
std::vector<Vec2> grid_points(const Vec2& floor_min, const Vec2& floor_max,
                              double spacing);

/// Validates invariants (positive spacing, non-degenerate floor, at least one
/// output inside the floor, well-formed catalog). Throws SceneError.
void validate_scene(const Scene& scene);

/// Parses a scene document (JSON text). Missing catalog/costs fall back to
/// defaults. Throws SceneError with the offending field path.
Scene parse_scene(const std::string& json_text);

/// Serializes a scene so that parse_scene(write_scene(s)) round-trips.
std::string write_scene(const Scene& scene);

/// Reads and parses a scene file; file-system problems surface as SceneError
/// on field "file".
Scene load_scene(const std::string& path);

}  // namespace layopt
