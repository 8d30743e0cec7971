#include "layopt/sched.hpp"

#include <random>
#include <string>
#include <vector>

#include "doctest.h"

namespace {

using layopt::build_schedule;
using layopt::Layout;
using layopt::order_deliveries;
using layopt::parse_schedule;
using layopt::PathStep;
using layopt::Schedule;
using layopt::write_schedule;

/// No element may run two overlapping tasks.
void check_disjoint(const Schedule& schedule) {
  std::vector<layopt::Task> all;
  for (const auto& box : schedule.boxes)
    all.insert(all.end(), box.begin(), box.end());
  for (size_t a = 0; a < all.size(); ++a)
    for (size_t b = a + 1; b < all.size(); ++b) {
      if (all[a].robot != all[b].robot) continue;
      const bool overlap =
          all[a].start < all[b].end && all[b].start < all[a].end;
      CHECK_FALSE(overlap);
    }
}

}  // namespace

TEST_CASE("sched: paths reduce to their transport elements") {
  Layout layout;
  layout.paths = {
      {{PathStep::Kind::input, -1},
       {PathStep::Kind::arm, 4},
       {PathStep::Kind::belt, 9},
       {PathStep::Kind::junction, 2},
       {PathStep::Kind::belt, 11},
       {PathStep::Kind::arm, 5},
       {PathStep::Kind::output, 0}},
      {{PathStep::Kind::input, -1},
       {PathStep::Kind::arm, 4},
       {PathStep::Kind::output, 1}},
  };
  const auto sequences = layopt::assign_paths(layout);
  REQUIRE(sequences.size() == 2);
  CHECK(sequences[0] == std::vector<int>{4, 9, 11, 5});
  CHECK(sequences[1] == std::vector<int>{4});
}

TEST_CASE("sched: longer deliveries are served first, ties stay in order") {
  CHECK(order_deliveries({{1, 2}, {1, 2, 3, 4, 5}, {1, 2, 3}}) ==
        std::vector<int>{1, 2, 0});
  CHECK(order_deliveries({{1, 2, 3}, {4, 5, 6}}) == std::vector<int>{0, 1});
  CHECK(order_deliveries({}) == std::vector<int>{});
}

TEST_CASE("sched: disjoint routes all start at time zero") {
  const Schedule s = build_schedule({{1, 2}, {3, 4}}, {0, 1});
  REQUIRE(s.boxes.size() == 2);
  for (const auto& box : s.boxes) {
    CHECK(box[0].start == 0.0);
    CHECK(box[0].end == 1.0);
    CHECK(box[1].start == 1.0);
    CHECK(box[1].end == 2.0);
  }
  CHECK(s.makespan() == 2.0);
}

TEST_CASE("sched: a shared first element pipelines deliveries") {
  // Both boxes ride element 7 first; the second box waits one slot.
  const Schedule s = build_schedule({{7, 8}, {7, 9}}, {0, 1});
  CHECK(s.boxes[0][0].start == 0.0);
  CHECK(s.boxes[1][0].start == 1.0);
  CHECK(s.boxes[1][1].end == 3.0);
  CHECK(s.makespan() == 3.0);
  check_disjoint(s);
}

TEST_CASE("sched: n boxes through one element shift by whole slots") {
  const Schedule s = build_schedule({{7}, {7}, {7}}, {0, 1, 2});
  CHECK(s.boxes[0][0].start == 0.0);
  CHECK(s.boxes[1][0].start == 1.0);
  CHECK(s.boxes[2][0].start == 2.0);
  CHECK(s.makespan() == 3.0);
  check_disjoint(s);
}

TEST_CASE("sched: a shared trunk shifts the whole delivery together") {
  const Schedule s = build_schedule({{1, 2, 3}, {1, 2, 4}}, {0, 1});
  // The shifted box keeps back-to-back handovers.
  REQUIRE(s.boxes[1].size() == 3);
  CHECK(s.boxes[1][0].start == 1.0);
  CHECK(s.boxes[1][1].start == 2.0);
  CHECK(s.boxes[1][2].start == 3.0);
  CHECK(s.makespan() == 4.0);
  check_disjoint(s);
}

TEST_CASE("sched: the service order is honored") {
  // Box 1 is longer, so order_deliveries sends it first and it claims slot 0.
  const auto sequences = std::vector<std::vector<int>>{{5}, {5, 6}};
  const Schedule s = build_schedule(sequences, order_deliveries(sequences));
  CHECK(s.boxes[1][0].start == 0.0);
  CHECK(s.boxes[0][0].start == 1.0);
}

TEST_CASE("sched: slot length scales the whole timetable") {
  const Schedule s = build_schedule({{7}, {7}}, {0, 1}, 2.5);
  CHECK(s.delta_t == 2.5);
  CHECK(s.boxes[0][0].end == 2.5);
  CHECK(s.boxes[1][0].start == 2.5);
  CHECK(s.makespan() == 5.0);
}

TEST_CASE("sched: random sequences always schedule conflict-free") {
  std::mt19937 rng(20240817);
  for (int round = 0; round < 50; ++round) {
    std::uniform_int_distribution<int> n_boxes(1, 6), length(1, 5), robot(0, 4);
    std::vector<std::vector<int>> sequences(n_boxes(rng));
    for (auto& seq : sequences) {
      seq.resize(length(rng));
      // Within one box a robot appears once; draw without replacement.
      std::vector<int> pool{0, 1, 2, 3, 4};
      std::shuffle(pool.begin(), pool.end(), rng);
      for (size_t i = 0; i < seq.size(); ++i) seq[i] = pool[i];
    }
    const Schedule s = build_schedule(sequences, order_deliveries(sequences));
    check_disjoint(s);
    for (size_t i = 0; i < sequences.size(); ++i) {
      REQUIRE(s.boxes[i].size() == sequences[i].size());
      for (size_t k = 0; k + 1 < s.boxes[i].size(); ++k)
        CHECK(s.boxes[i][k].end == s.boxes[i][k + 1].start);
    }
  }
}

TEST_CASE("sched: schedule documents round-trip") {
  const Schedule s = build_schedule({{1, 2}, {1, 3}}, {0, 1}, 0.5);
  const Schedule back = parse_schedule(write_schedule(s));
  CHECK(back.delta_t == s.delta_t);
  REQUIRE(back.boxes.size() == s.boxes.size());
  for (size_t i = 0; i < s.boxes.size(); ++i) {
    REQUIRE(back.boxes[i].size() == s.boxes[i].size());
    for (size_t k = 0; k < s.boxes[i].size(); ++k) {
      CHECK(back.boxes[i][k].robot == s.boxes[i][k].robot);
      CHECK(back.boxes[i][k].start == s.boxes[i][k].start);
      CHECK(back.boxes[i][k].end == s.boxes[i][k].end);
    }
  }
}

TEST_CASE("sched: malformed documents are rejected") {
  CHECK_THROWS_WITH_AS(parse_schedule("not json"),
                       doctest::Contains("schedule"), std::runtime_error);
  CHECK_THROWS_AS(parse_schedule("[1, 2, 3]"), std::runtime_error);
}

TEST_CASE("sched: empty schedules have zero makespan") {
  CHECK(Schedule{}.makespan() == 0.0);
  CHECK(build_schedule({}, {}).makespan() == 0.0);
}
