#include "layopt/sched.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace layopt {

using nlohmann::json;

double Schedule::makespan() const {
  double latest = 0.0;
  for (const auto& tasks : boxes)
    for (const Task& t : tasks) latest = std::max(latest, t.end);
  return latest;
}

std::vector<std::vector<int>> assign_paths(const Layout& layout) {
  std::vector<std::vector<int>> sequences;
  sequences.reserve(layout.paths.size());
  for (const auto& path : layout.paths) {
    std::vector<int> sequence;
    for (const PathStep& step : path)
      if (step.kind == PathStep::Kind::arm ||
          step.kind == PathStep::Kind::belt)
        sequence.push_back(step.index);
    sequences.push_back(std::move(sequence));
  }
  return sequences;
}

std::vector<int> order_deliveries(
    const std::vector<std::vector<int>>& sequences) {
  std::vector<int> order(sequences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return sequences[a].size() > sequences[b].size();
  });
  return order;
}

Schedule build_schedule(const std::vector<std::vector<int>>& sequences,
                        const std::vector<int>& order, double delta_t) {
  Schedule schedule;
  schedule.delta_t = delta_t;
  schedule.boxes.resize(sequences.size());

  // Tasks already committed, grouped by element.
  std::vector<std::pair<int, std::pair<double, double>>> committed;
  for (int box : order) {
    const auto& sequence = sequences[box];
    double shift = 0.0;
    bool conflict = true;
    while (conflict) {
      conflict = false;
      for (size_t k = 0; k < sequence.size() && !conflict; ++k) {
        const double start = shift + static_cast<double>(k) * delta_t;
        const double end = start + delta_t;
        for (const auto& [robot, interval] : committed)
          if (robot == sequence[k] && start < interval.second &&
              interval.first < end) {
            conflict = true;
            break;
          }
      }
      if (conflict) shift += delta_t;
    }
    auto& tasks = schedule.boxes[box];
    for (size_t k = 0; k < sequence.size(); ++k) {
      const double start = shift + static_cast<double>(k) * delta_t;
      tasks.push_back({sequence[k], start, start + delta_t});
      committed.push_back({sequence[k], {start, start + delta_t}});
    }
  }
  return schedule;
}

std::string write_schedule(const Schedule& schedule) {
  json doc;
  doc["delta_t"] = schedule.delta_t;
  doc["boxes"] = json::array();
  for (const auto& tasks : schedule.boxes) {
    json list = json::array();
    for (const Task& t : tasks)
      list.push_back({{"robot", t.robot}, {"start", t.start}, {"end", t.end}});
    doc["boxes"].push_back(std::move(list));
  }
  return doc.dump(2) + "\n";
}

Schedule parse_schedule(const std::string& json_text) {
  try {
    const json doc = json::parse(json_text);
    Schedule schedule;
    schedule.delta_t = doc.at("delta_t").get<double>();
    for (const auto& list : doc.at("boxes")) {
      std::vector<Task> tasks;
      for (const auto& entry : list)
        tasks.push_back({entry.at("robot").get<int>(),
                         entry.at("start").get<double>(),
                         entry.at("end").get<double>()});
      schedule.boxes.push_back(std::move(tasks));
    }
    return schedule;
  } catch (const json::exception& err) {
    throw std::runtime_error(std::string("schedule: ") + err.what());
  }
}

}  // namespace layopt
