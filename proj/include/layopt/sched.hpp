#pragma once

#include "layopt/netmodel.hpp"

#include <string>
#include <vector>

namespace layopt {

/// One transport task: an element carries one box over one hop.
struct Task {
  int robot = -1;      ///< placement index of the arm or belt executing it
  double start = 0.0;  ///< half-open interval [start, end)
  double end = 0.0;
};

/// Conflict-free timetable. Tasks of one box are back to back (each handover
/// instant is shared by the two adjacent tasks) and no element ever runs two
/// overlapping tasks.
struct Schedule {
  double delta_t = 1.0;
  std::vector<std::vector<Task>> boxes;  ///< per box, in hop order

  double makespan() const;
};

/// Element sequence each box rides, in hop order: the delivery path
/// restricted to arm and belt steps (ports and junctions drop out).
std::vector<std::vector<int>> assign_paths(const Layout& layout);

/// Service order: boxes with longer element sequences go first; equal
/// lengths keep ascending box index.
std::vector<int> order_deliveries(
    const std::vector<std::vector<int>>& sequences);

/// Every box starts at time zero with one task per hop, each `delta_t` long;
/// scanning boxes in service order, a box whose tasks overlap an earlier
/// box's task on the same element is shifted later by whole multiples of
/// `delta_t` until conflict-free. Whole-box shifts keep handovers adjacent.
Schedule build_schedule(const std::vector<std::vector<int>>& sequences,
                        const std::vector<int>& order, double delta_t = 1.0);

/// Schedule document (JSON): delta_t plus per-box task lists, each task as
/// {robot, start, end}. Parsed back by parse_schedule.
std::string write_schedule(const Schedule& schedule);
Schedule parse_schedule(const std::string& json_text);

}  // namespace layopt
