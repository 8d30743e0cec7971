#include "layopt/motion.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace layopt {

namespace {

constexpr double kPi = std::numbers::pi;

Vec2 unit(double angle) { return Vec2{std::cos(angle), std::sin(angle)}; }

Vec2 rot90(const Vec2& v) { return Vec2{-v.y(), v.x()}; }

/// Flat variable layout: arms own 3 joints per knot, belts own the affine
/// prismatic profile [shift, rate] plus one grasp offset per carried box.
struct VarMap {
  std::vector<int> offset;
  int knots = 1;
  int count = 0;

  explicit VarMap(const MotionProblem& pb) {
    knots = pb.num_steps + 1;
    offset.reserve(pb.robots.size());
    for (const MotionRobot& r : pb.robots) {
      offset.push_back(count);
      count += r.is_arm ? 3 * knots : 2 + static_cast<int>(r.boxes.size());
    }
  }
  int arm_joint(int r, int t, int j) const { return offset[r] + 3 * t + j; }
  int belt_shift(int r) const { return offset[r]; }
  int belt_rate(int r) const { return offset[r] + 1; }
  int belt_grasp(int r, int slot) const { return offset[r] + 2 + slot; }
};

int grasp_slot(const MotionRobot& robot, int box) {
  for (std::size_t k = 0; k < robot.boxes.size(); ++k) {
    if (robot.boxes[k] == box) return static_cast<int>(k);
  }
  throw std::runtime_error("motion: belt has no grasp slot for the box");
}

/// Joint positions and rotated segment vectors of one arm at one knot.
struct ArmFrame {
  Vec2 p[4];    ///< joint positions, p[0] = base, p[3] = effector
  Vec2 seg[3];  ///< link vectors: links[m] * unit(cumulative angle m)
  double heading = 0.0;
};

ArmFrame make_frame(const PlanarArm& arm, const Eigen::Vector3d& joints) {
  ArmFrame f;
  f.p[0] = arm.base;
  double cum = 0.0;
  for (int m = 0; m < 3; ++m) {
    cum += joints[m];
    f.seg[m] = arm.links[m] * unit(cum);
    f.p[m + 1] = f.p[m] + f.seg[m];
  }
  f.heading = cum;
  return f;
}

/// Sparse gradient row of one scalar residual; add() merges repeated
/// variables so same-arm collision terms accumulate correctly.
struct Row {
  int n = 0;
  int idx[12];
  double der[12];

  void clear() { n = 0; }
  void add(int var, double d) {
    for (int k = 0; k < n; ++k) {
      if (idx[k] == var) {
        der[k] += d;
        return;
      }
    }
    idx[n] = var;
    der[n] = d;
    ++n;
  }
};

struct EvalResult {
  double phi = 0.0;
  double worst = 0.0;
  std::string worst_name;
};

/// Accumulates the penalized objective, its (half) gradient and the
/// Gauss-Newton hessian approximation over every residual row.
class Evaluator {
 public:
  Evaluator(const MotionProblem& pb, double margin)
      : pb_(pb), vm_(pb), margin_(margin) {}

  const VarMap& vars() const { return vm_; }

  EvalResult run(const Eigen::VectorXd& x, double mu_eq, double mu_in,
                 Eigen::MatrixXd* hess, Eigen::VectorXd* grad) {
    x_ = &x;
    hess_ = hess;
    grad_ = grad;
    out_ = EvalResult{};
    build_frames(x);
    smoothness_rows(x);
    for (const GraspEvent& e : pb_.picks) grasp_rows(e, mu_eq, "pick");
    for (const GraspEvent& e : pb_.places) grasp_rows(e, mu_eq, "place");
    for (const HandoverEvent& e : pb_.handovers) handover_rows(e, mu_eq);
    for (const OnBeltStep& e : pb_.rides) ride_rows(x, e, mu_in);
    joint_limit_rows(x, mu_in);
    collision_rows(mu_in);
    return out_;
  }

 private:
  const MotionProblem& pb_;
  VarMap vm_;
  double margin_;
  const Eigen::VectorXd* x_ = nullptr;
  Eigen::MatrixXd* hess_ = nullptr;
  Eigen::VectorXd* grad_ = nullptr;
  EvalResult out_;
  std::vector<ArmFrame> frames_;
  Row row_;

  const ArmFrame& frame(int r, int t) const {
    return frames_[static_cast<std::size_t>(r) * vm_.knots + t];
  }

  void build_frames(const Eigen::VectorXd& x) {
    frames_.assign(pb_.robots.size() * static_cast<std::size_t>(vm_.knots),
                   ArmFrame{});
    for (std::size_t r = 0; r < pb_.robots.size(); ++r) {
      if (!pb_.robots[r].is_arm) continue;
      for (int t = 0; t < vm_.knots; ++t) {
        Eigen::Vector3d q{x[vm_.arm_joint(static_cast<int>(r), t, 0)],
                          x[vm_.arm_joint(static_cast<int>(r), t, 1)],
                          x[vm_.arm_joint(static_cast<int>(r), t, 2)]};
        frames_[r * vm_.knots + t] = make_frame(pb_.robots[r].arm, q);
      }
    }
  }

  /// Scatter one residual row: phi += phi_term, grad += g_coef * der,
  /// hess += h_coef * der * der^T.
  void scatter(double phi_term, double g_coef, double h_coef) {
    out_.phi += phi_term;
    if (grad_ != nullptr) {
      for (int a = 0; a < row_.n; ++a) {
        (*grad_)[row_.idx[a]] += g_coef * row_.der[a];
      }
    }
    if (hess_ != nullptr) {
      for (int a = 0; a < row_.n; ++a) {
        for (int b = 0; b < row_.n; ++b) {
          (*hess_)(row_.idx[a], row_.idx[b]) +=
              h_coef * row_.der[a] * row_.der[b];
        }
      }
    }
  }

  /// Quadratic penalty on an equality residual v = 0.
  void equality(double v, double mu) {
    scatter(mu * v * v, mu * v, mu);
  }

  /// Cubic penalty on an inequality c >= 0, activated below the margin.
  /// The row must hold the gradient of c.
  void inequality(double c, double mu) {
    double t = margin_ - c;
    if (t <= 0.0) return;
    for (int a = 0; a < row_.n; ++a) row_.der[a] = -row_.der[a];
    scatter(mu * t * t * t, 1.5 * mu * t * t, 2.25 * mu * t);
  }

  template <typename... Args>
  void note_violation(double violation, const char* fmt, Args... args) {
    if (violation <= out_.worst) return;
    out_.worst = violation;
    char buf[96];
    std::snprintf(buf, sizeof(buf), fmt, args...);
    out_.worst_name = buf;
  }

  void smoothness_rows(const Eigen::VectorXd& x) {
    const double h = pb_.step_time;
    const double bv = pb_.beta_velocity / (h * h);
    const double ba = pb_.beta_acceleration / (h * h * h * h);
    for (std::size_t r = 0; r < pb_.robots.size(); ++r) {
      const int ri = static_cast<int>(r);
      if (pb_.robots[r].is_arm) {
        for (int t = 0; t + 1 < vm_.knots; ++t) {
          for (int j = 0; j < 3; ++j) {
            const int i0 = vm_.arm_joint(ri, t, j);
            const int i1 = vm_.arm_joint(ri, t + 1, j);
            double v = x[i1] - x[i0];
            row_.clear();
            row_.add(i1, 1.0);
            row_.add(i0, -1.0);
            scatter(bv * v * v, bv * v, bv);
          }
        }
        for (int t = 1; t + 1 < vm_.knots; ++t) {
          for (int j = 0; j < 3; ++j) {
            const int im = vm_.arm_joint(ri, t - 1, j);
            const int i0 = vm_.arm_joint(ri, t, j);
            const int ip = vm_.arm_joint(ri, t + 1, j);
            double v = x[ip] - 2.0 * x[i0] + x[im];
            row_.clear();
            row_.add(ip, 1.0);
            row_.add(i0, -2.0);
            row_.add(im, 1.0);
            scatter(ba * v * v, ba * v, ba);
          }
        }
      } else {
        const int ib = vm_.belt_rate(ri);
        for (int t = 0; t + 1 < vm_.knots; ++t) {
          double v = x[ib];
          row_.clear();
          row_.add(ib, 1.0);
          scatter(bv * v * v, bv * v, bv);
        }
      }
    }
  }

  /// Effector position residuals against a port (picks and places). Only
  /// the position is pinned: a box at a port may be gripped from any side,
  /// so the pose's heading merely seeds the initial guess.
  void grasp_rows(const GraspEvent& e, double mu, const char* what) {
    const ArmFrame& f = frame(e.robot, e.step);
    Vec2 dp = f.p[3] - e.pose.position;
    for (int comp = 0; comp < 2; ++comp) {
      row_.clear();
      for (int j = 0; j < 3; ++j) {
        Vec2 d = Vec2::Zero();
        for (int m = j; m < 3; ++m) d += rot90(f.seg[m]);
        row_.add(vm_.arm_joint(e.robot, e.step, j), d[comp]);
      }
      equality(dp[comp], mu);
    }
    note_violation(dp.cwiseAbs().maxCoeff(), "%s box %d", what, e.box);
  }

  /// World pose of the box a belt carries, plus gradient rows.
  struct BeltPose {
    Vec2 position;
    double heading;
    Vec2 u;  ///< track direction: d(position)/d(longitudinal coordinate)
    int shift_var, rate_var, grasp_var;
    double t;
  };

  BeltPose belt_pose(const Eigen::VectorXd& x, int r, int box, int t) const {
    const BeltTrack& belt = pb_.robots[r].belt;
    BeltPose bp;
    bp.shift_var = vm_.belt_shift(r);
    bp.rate_var = vm_.belt_rate(r);
    bp.grasp_var = vm_.belt_grasp(r, grasp_slot(pb_.robots[r], box));
    bp.t = static_cast<double>(t);
    double along = x[bp.shift_var] + x[bp.rate_var] * bp.t + x[bp.grasp_var];
    PlanarPose pose = belt.pose_at(along);
    bp.position = pose.position;
    bp.heading = pose.heading;
    bp.u = belt.direction();
    return bp;
  }

  void add_belt_position_grad(const BeltPose& bp, int comp, double sign) {
    row_.add(bp.shift_var, sign * bp.u[comp]);
    row_.add(bp.rate_var, sign * bp.t * bp.u[comp]);
    row_.add(bp.grasp_var, sign * bp.u[comp]);
  }

  /// Receiver effector meets the giver's box with the opposite heading.
  void handover_rows(const HandoverEvent& e, double mu) {
    const bool giver_arm = pb_.robots[e.giver].is_arm;
    const bool recv_arm = pb_.robots[e.receiver].is_arm;
    Vec2 gp, rp;
    double gh, rh;
    BeltPose gbp, rbp;
    if (giver_arm) {
      const ArmFrame& f = frame(e.giver, e.step);
      gp = f.p[3];
      gh = f.heading;
    } else {
      gbp = belt_pose(*x_, e.giver, e.box, e.step);
      gp = gbp.position;
      gh = gbp.heading;
    }
    if (recv_arm) {
      const ArmFrame& f = frame(e.receiver, e.step);
      rp = f.p[3];
      rh = f.heading;
    } else {
      rbp = belt_pose(*x_, e.receiver, e.box, e.step);
      rp = rbp.position;
      rh = rbp.heading;
    }

    Vec2 dp = rp - gp;
    // Opposed headings up to full turns: the residual takes the nearest
    // branch so nobody has to wind up a joint by 2*pi.
    double dh = std::remainder(rh - gh - kPi, 2.0 * kPi);
    for (int comp = 0; comp < 2; ++comp) {
      row_.clear();
      if (recv_arm) {
        const ArmFrame& f = frame(e.receiver, e.step);
        for (int j = 0; j < 3; ++j) {
          Vec2 d = Vec2::Zero();
          for (int m = j; m < 3; ++m) d += rot90(f.seg[m]);
          row_.add(vm_.arm_joint(e.receiver, e.step, j), d[comp]);
        }
      } else {
        add_belt_position_grad(rbp, comp, 1.0);
      }
      if (giver_arm) {
        const ArmFrame& f = frame(e.giver, e.step);
        for (int j = 0; j < 3; ++j) {
          Vec2 d = Vec2::Zero();
          for (int m = j; m < 3; ++m) d += rot90(f.seg[m]);
          row_.add(vm_.arm_joint(e.giver, e.step, j), -d[comp]);
        }
      } else {
        add_belt_position_grad(gbp, comp, -1.0);
      }
      equality(dp[comp], mu);
    }
    row_.clear();
    if (recv_arm) {
      for (int j = 0; j < 3; ++j)
        row_.add(vm_.arm_joint(e.receiver, e.step, j), 1.0);
    }
    if (giver_arm) {
      for (int j = 0; j < 3; ++j)
        row_.add(vm_.arm_joint(e.giver, e.step, j), -1.0);
    }
    equality(dh, mu);
    double viol = std::max(dp.cwiseAbs().maxCoeff(), std::abs(dh));
    note_violation(viol, "handover box %d step %d", e.box, e.step);
  }

  /// Box coordinate stays strictly inside the belt span.
  void ride_rows(const Eigen::VectorXd& x, const OnBeltStep& e, double mu) {
    const BeltTrack& belt = pb_.robots[e.robot].belt;
    const double half = 0.5 * belt.length();
    const int is = vm_.belt_shift(e.robot);
    const int ir = vm_.belt_rate(e.robot);
    const int ig = vm_.belt_grasp(e.robot, grasp_slot(pb_.robots[e.robot], e.box));
    const double t = static_cast<double>(e.step);
    double along = x[is] + x[ir] * t + x[ig];

    row_.clear();
    row_.add(is, 1.0);
    row_.add(ir, t);
    row_.add(ig, 1.0);
    inequality(along + half, mu);

    row_.clear();
    row_.add(is, -1.0);
    row_.add(ir, -t);
    row_.add(ig, -1.0);
    inequality(half - along, mu);

    double viol = std::max(0.0, std::abs(along) - half);
    note_violation(viol, "on-belt box %d step %d", e.box, e.step);
  }

  void joint_limit_rows(const Eigen::VectorXd& x, double mu) {
    for (std::size_t r = 0; r < pb_.robots.size(); ++r) {
      if (!pb_.robots[r].is_arm) continue;
      const double lim = pb_.robots[r].arm.joint_limit;
      for (int t = 0; t < vm_.knots; ++t) {
        for (int j = 0; j < 3; ++j) {
          const int iv = vm_.arm_joint(static_cast<int>(r), t, j);
          row_.clear();
          row_.add(iv, -1.0);
          inequality(lim - x[iv], mu);
          row_.clear();
          row_.add(iv, 1.0);
          inequality(x[iv] + lim, mu);
          double viol = std::max(0.0, std::abs(x[iv]) - lim);
          note_violation(viol, "joint limit robot %d step %d",
                         static_cast<int>(r), t);
        }
      }
    }
  }

  /// Disc d sits at the quarter points of link d/2.
  Vec2 disc_center(const ArmFrame& f, int disc) const {
    const int link = disc / 2;
    const double frac = (disc % 2 == 0) ? 0.25 : 0.75;
    return f.p[link] + frac * f.seg[link];
  }

  /// d(center)/d(joint j) for a disc on `link` of the frame.
  Vec2 disc_center_grad(const ArmFrame& f, int disc, int j) const {
    const int link = disc / 2;
    const double frac = (disc % 2 == 0) ? 0.25 : 0.75;
    if (j > link) return Vec2::Zero();
    Vec2 d = frac * rot90(f.seg[link]);
    for (int m = j; m < link; ++m) d += rot90(f.seg[m]);
    return d;
  }

  void collision_rows(double mu) {
    for (const DiscPair& pair : pb_.disc_pairs) {
      const double radii =
          pb_.robots[pair.robot_a].disc_radius + pb_.robots[pair.robot_b].disc_radius;
      for (int t = 0; t < vm_.knots; ++t) {
        const ArmFrame& fa = frame(pair.robot_a, t);
        const ArmFrame& fb = frame(pair.robot_b, t);
        Vec2 ca = disc_center(fa, pair.disc_a);
        Vec2 cb = disc_center(fb, pair.disc_b);
        Vec2 diff = ca - cb;
        double dist = diff.norm();
        double c = dist - radii;
        double viol = std::max(0.0, -c);
        note_violation(viol, "collision robots %d/%d step %d", pair.robot_a,
                       pair.robot_b, t);
        if (margin_ - c <= 0.0) continue;
        Vec2 n = dist > 1e-12 ? Vec2(diff / dist) : Vec2{1.0, 0.0};
        row_.clear();
        for (int j = 0; j < 3; ++j) {
          double da = n.dot(disc_center_grad(fa, pair.disc_a, j));
          if (da != 0.0) row_.add(vm_.arm_joint(pair.robot_a, t, j), da);
          double db = -n.dot(disc_center_grad(fb, pair.disc_b, j));
          if (db != 0.0) row_.add(vm_.arm_joint(pair.robot_b, t, j), db);
        }
        inequality(c, mu);
      }
    }
  }
};

/// Elbow-up/down inverse kinematics fit; falls back to pointing the chain
/// at the target when the pose is out of reach. Branches are scored by
/// joint-limit slack, then by continuity with `previous` when given.
Eigen::Vector3d ik_fit(const PlanarArm& arm, const PlanarPose& target,
                       const Eigen::Vector3d* previous = nullptr) {
  const double l1 = arm.links[0], l2 = arm.links[1], l3 = arm.links[2];
  Vec2 w = target.position - l3 * unit(target.heading) - arm.base;
  const double r = w.norm();
  auto stretch = [&]() {
    Vec2 d = target.position - arm.base;
    double th1 = d.norm() > 1e-12 ? std::atan2(d.y(), d.x()) : 0.0;
    double th3 = std::remainder(target.heading - th1, 2.0 * kPi);
    return Eigen::Vector3d{th1, 0.0, th3};
  };
  auto score_of = [&](const Eigen::Vector3d& q) {
    double over = 0.0;
    for (int j = 0; j < 3; ++j) {
      over += std::max(0.0, std::abs(q[j]) - (arm.joint_limit - 0.1));
    }
    double tie = previous != nullptr ? (q - *previous).norm() : std::abs(q[2]);
    return over * 1e6 + tie;
  };
  Eigen::Vector3d best = stretch();
  double best_score = score_of(best);
  if (r > l1 + l2 || r < std::abs(l1 - l2) || r < 1e-12) return best;

  double cos2 = (r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  cos2 = std::clamp(cos2, -1.0, 1.0);
  for (double sign : {1.0, -1.0}) {
    double th2 = sign * std::acos(cos2);
    double th1 = std::remainder(std::atan2(w.y(), w.x()) -
                                    std::atan2(l2 * std::sin(th2),
                                               l1 + l2 * std::cos(th2)),
                                2.0 * kPi);
    double th3 = std::remainder(target.heading - th1 - th2, 2.0 * kPi);
    Eigen::Vector3d q{th1, th2, th3};
    double score = score_of(q);
    if (score < best_score) {
      best_score = score;
      best = q;
    }
  }
  return best;
}

int step_of(double time, double delta_t, int steps_per_slot) {
  return static_cast<int>(std::llround(time / delta_t * steps_per_slot));
}

}  // namespace

PlanarPose forward_kinematics(const PlanarArm& arm,
                              const Eigen::Vector3d& joints) {
  ArmFrame f = make_frame(arm, joints);
  return PlanarPose{f.p[3], f.heading};
}

PlanarPose BeltTrack::pose_at(double along) const {
  Vec2 u = direction();
  Vec2 mid = 0.5 * (tail + head);
  return PlanarPose{mid + along * u, std::atan2(u.y(), u.x())};
}

MotionProblem build_motion_problem(const Schedule& schedule,
                                   const Layout& layout, const Scene& scene,
                                   int steps_per_slot) {
  if (steps_per_slot < 1) {
    throw std::runtime_error("motion: steps_per_slot must be positive");
  }
  MotionProblem pb;
  pb.step_time = schedule.delta_t / steps_per_slot;

  std::vector<int> robot_of;  // parallel to pb.robots: placement index
  auto intern = [&](int placement) {
    for (std::size_t k = 0; k < robot_of.size(); ++k) {
      if (robot_of[k] == placement) return static_cast<int>(k);
    }
    MotionRobot robot;
    robot.placement = placement;
    bool found = false;
    for (const Layout::Arm& a : layout.arms) {
      if (a.placement != placement) continue;
      robot.is_arm = true;
      robot.arm.base = a.position;
      const RobotType& type = scene.catalog[a.type_index];
      robot.arm.links =
          Eigen::Vector3d{0.4, 0.3, 0.15} / 0.85 * type.reach_max;
      robot.arm.joint_limit = kPi;
      robot.disc_radius = 0.5 * type.clearance_radius;
      found = true;
      break;
    }
    if (!found) {
      for (const Layout::Belt& b : layout.belts) {
        if (b.placement != placement) continue;
        robot.is_arm = false;
        robot.belt.tail = b.anchor;
        robot.belt.head = b.head;
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::runtime_error("motion: scheduled element missing from layout");
    }
    robot_of.push_back(placement);
    pb.robots.push_back(robot);
    return static_cast<int>(robot_of.size()) - 1;
  };

  auto arm_grasp_pose = [&](int robot, const Vec2& port) {
    const Vec2 base = pb.robots[robot].arm.base;
    Vec2 d = port - base;
    double heading = d.norm() > 1e-12 ? std::atan2(d.y(), d.x()) : 0.0;
    return PlanarPose{port, heading};
  };

  int last_step = 0;
  for (std::size_t i = 0; i < schedule.boxes.size(); ++i) {
    const std::vector<Task>& tasks = schedule.boxes[i];
    if (tasks.empty()) continue;
    const int box = static_cast<int>(i);

    std::vector<int> chain;
    chain.reserve(tasks.size());
    for (const Task& task : tasks) chain.push_back(intern(task.robot));

    const int first = chain.front();
    const int last = chain.back();
    if (!pb.robots[first].is_arm || !pb.robots[last].is_arm) {
      throw std::runtime_error("motion: box must be picked and placed by arms");
    }

    const int pick_step =
        step_of(tasks.front().start, schedule.delta_t, steps_per_slot);
    pb.picks.push_back(GraspEvent{first, pick_step, box,
                                  arm_grasp_pose(first, scene.input)});
    const int place_step =
        step_of(tasks.back().end, schedule.delta_t, steps_per_slot);
    pb.places.push_back(GraspEvent{
        last, place_step, box,
        arm_grasp_pose(last, scene.outputs[i].pos)});
    last_step = std::max(last_step, place_step);

    for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
      const int boundary =
          step_of(tasks[k].end, schedule.delta_t, steps_per_slot);
      pb.handovers.push_back(
          HandoverEvent{chain[k], chain[k + 1], boundary, box});
    }

    for (std::size_t k = 0; k < chain.size(); ++k) {
      MotionRobot& robot = pb.robots[chain[k]];
      if (robot.is_arm) continue;
      if (std::find(robot.boxes.begin(), robot.boxes.end(), box) ==
          robot.boxes.end()) {
        robot.boxes.push_back(box);
      }
      const int from = step_of(tasks[k].start, schedule.delta_t, steps_per_slot);
      const int to = step_of(tasks[k].end, schedule.delta_t, steps_per_slot);
      for (int s = from; s <= to; ++s) {
        pb.rides.push_back(OnBeltStep{chain[k], box, s});
      }
    }
  }
  pb.num_steps = last_step;

  const int n_robots = static_cast<int>(pb.robots.size());
  for (int a = 0; a < n_robots; ++a) {
    if (!pb.robots[a].is_arm) continue;
    // Non-adjacent links of one arm: the first and last link.
    for (int da : {0, 1}) {
      for (int db : {4, 5}) {
        pb.disc_pairs.push_back(DiscPair{a, da, a, db});
      }
    }
    const double reach_a = pb.robots[a].arm.links.sum();
    for (int b = a + 1; b < n_robots; ++b) {
      if (!pb.robots[b].is_arm) continue;
      const double reach_b = pb.robots[b].arm.links.sum();
      const double span = (pb.robots[a].arm.base - pb.robots[b].arm.base).norm();
      if (span > reach_a + reach_b + pb.robots[a].disc_radius +
                     pb.robots[b].disc_radius + 0.01) {
        continue;  // discs can never meet, even at full stretch
      }
      for (int da = 0; da < 6; ++da) {
        for (int db = 0; db < 6; ++db) {
          // Grippers meet on purpose at handovers: the two last links are
          // allowed to touch, everything else keeps clear.
          if (da >= 4 && db >= 4) continue;
          pb.disc_pairs.push_back(DiscPair{a, da, b, db});
        }
      }
    }
  }
  return pb;
}

int motion_variable_count(const MotionProblem& problem) {
  return VarMap(problem).count;
}

Eigen::VectorXd motion_initial_guess(const MotionProblem& problem) {
  VarMap vm(problem);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(vm.count);
  for (std::size_t r = 0; r < problem.robots.size(); ++r) {
    const MotionRobot& robot = problem.robots[r];
    if (!robot.is_arm) continue;
    const int ri = static_cast<int>(r);

    // Every pose this arm must hit, in step order: ports as given, handover
    // meeting points halfway to the partner, facing it.
    std::vector<std::pair<int, PlanarPose>> targets;
    for (const GraspEvent& e : problem.picks) {
      if (e.robot == ri) targets.emplace_back(e.step, e.pose);
    }
    for (const GraspEvent& e : problem.places) {
      if (e.robot == ri) targets.emplace_back(e.step, e.pose);
    }
    for (const HandoverEvent& e : problem.handovers) {
      int partner = e.giver == ri ? e.receiver : (e.receiver == ri ? e.giver : -1);
      if (partner < 0) continue;
      const MotionRobot& other = problem.robots[partner];
      Vec2 anchor = other.is_arm ? other.arm.base
                                 : Vec2(0.5 * (other.belt.tail + other.belt.head));
      Vec2 meet = 0.5 * (robot.arm.base + anchor);
      Vec2 d = anchor - robot.arm.base;
      double heading = d.norm() > 1e-12 ? std::atan2(d.y(), d.x()) : 0.0;
      targets.emplace_back(e.step, PlanarPose{meet, heading});
    }
    std::sort(targets.begin(), targets.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    if (targets.empty()) continue;

    // Joint configurations at the event knots, linearly interpolated in
    // between and held constant before the first and after the last.
    std::vector<std::pair<int, Eigen::Vector3d>> knots;
    knots.reserve(targets.size());
    for (const auto& [step, pose] : targets) {
      const Eigen::Vector3d* prev = knots.empty() ? nullptr : &knots.back().second;
      Eigen::Vector3d q = ik_fit(robot.arm, pose, prev);
      if (!knots.empty() && knots.back().first == step) continue;
      knots.emplace_back(step, q);
    }
    std::size_t seg = 0;
    for (int t = 0; t < vm.knots; ++t) {
      while (seg + 1 < knots.size() && knots[seg + 1].first <= t) ++seg;
      Eigen::Vector3d q;
      if (t <= knots.front().first || knots.size() == 1) {
        q = t <= knots.front().first ? knots.front().second : knots.back().second;
      } else if (seg + 1 >= knots.size()) {
        q = knots.back().second;
      } else {
        const auto& [t0, q0] = knots[seg];
        const auto& [t1, q1] = knots[seg + 1];
        double w = t1 > t0 ? double(t - t0) / double(t1 - t0) : 0.0;
        q = (1.0 - w) * q0 + w * q1;
      }
      for (int j = 0; j < 3; ++j) x[vm.arm_joint(ri, t, j)] = q[j];
    }
  }
  return x;
}

double motion_objective(const MotionProblem& problem,
                        const Eigen::VectorXd& vars, double mu_equality,
                        double mu_inequality, double margin) {
  Evaluator ev(problem, margin);
  return ev.run(vars, mu_equality, mu_inequality, nullptr, nullptr).phi;
}

Eigen::VectorXd motion_gradient(const MotionProblem& problem,
                                const Eigen::VectorXd& vars,
                                double mu_equality, double mu_inequality,
                                double margin) {
  Evaluator ev(problem, margin);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(vars.size());
  ev.run(vars, mu_equality, mu_inequality, nullptr, &g);
  return 2.0 * g;  // phi = sum r^2, the evaluator accumulates sum r*dr
}

Trajectories solve_trajectories(const MotionProblem& problem,
                                const MotionParams& params) {
  Evaluator ev(problem, params.margin);
  const VarMap& vm = ev.vars();
  Trajectories out;
  if (vm.count == 0) return out;

  Eigen::VectorXd x = motion_initial_guess(problem);
  Eigen::MatrixXd hess(vm.count, vm.count);
  Eigen::VectorXd grad(vm.count);
  double mu = params.penalty_init;
  EvalResult last;

  for (int round = 0; round < params.penalty_rounds; ++round) {
    out.round_objectives.emplace_back();
    for (int it = 0; it < params.max_iterations; ++it) {
      hess.setZero();
      grad.setZero();
      EvalResult res = ev.run(x, mu, mu, &hess, &grad);
      if (grad.lpNorm<Eigen::Infinity>() < 1e-14) break;
      hess.diagonal().array() += 1e-10;
      Eigen::VectorXd dir = hess.ldlt().solve(-grad);
      double slope = 2.0 * grad.dot(dir);
      if (!(slope < 0.0) || !dir.allFinite()) {
        dir = -grad;
        slope = -2.0 * grad.squaredNorm();
      }
      double alpha = 1.0;
      bool accepted = false;
      double phi_trial = res.phi;
      for (int h = 0; h <= params.max_halvings; ++h) {
        phi_trial = ev.run(x + alpha * dir, mu, mu, nullptr, nullptr).phi;
        if (phi_trial <= res.phi + 1e-4 * alpha * slope) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (std::getenv("LAYOPT_MOTION_TRACE") != nullptr) {
        std::fprintf(stderr,
                     "round %d it %d mu %.1e phi %.6e worst %.3e slope %.3e "
                     "alpha %.3e accepted %d\n",
                     round, it, mu, res.phi, res.worst, slope, alpha,
                     accepted ? 1 : 0);
      }
      if (!accepted) break;
      x += alpha * dir;
      ++out.iterations;
      out.round_objectives.back().push_back(phi_trial);
      if (alpha * dir.norm() < params.step_tolerance) break;
    }
    last = ev.run(x, mu, mu, nullptr, nullptr);
    if (last.worst < params.tolerance) break;
    mu *= params.penalty_growth;
  }

  out.worst_residual = last.worst;
  out.worst_constraint = last.worst_name;
  if (last.worst >= params.tolerance) {
    std::ostringstream msg;
    msg << "residual failure: " << last.worst_name << " residual "
        << last.worst;
    throw std::runtime_error(msg.str());
  }
  out.objective = ev.run(x, 0.0, 0.0, nullptr, nullptr).phi;

  out.arm_joints.resize(problem.robots.size());
  out.belt_state.resize(problem.robots.size());
  for (std::size_t r = 0; r < problem.robots.size(); ++r) {
    const int ri = static_cast<int>(r);
    if (problem.robots[r].is_arm) {
      Eigen::MatrixXd m(vm.knots, 3);
      for (int t = 0; t < vm.knots; ++t) {
        for (int j = 0; j < 3; ++j) m(t, j) = x[vm.arm_joint(ri, t, j)];
      }
      out.arm_joints[r] = std::move(m);
    } else {
      Eigen::VectorXd s(2 + problem.robots[r].boxes.size());
      s[0] = x[vm.belt_shift(ri)];
      s[1] = x[vm.belt_rate(ri)];
      for (std::size_t k = 0; k < problem.robots[r].boxes.size(); ++k) {
        s[2 + k] = x[vm.belt_grasp(ri, static_cast<int>(k))];
      }
      out.belt_state[r] = std::move(s);
    }
  }
  return out;
}

std::string write_trajectory_csv(const MotionProblem& problem,
                                 const Trajectories& trajectories) {
  std::ostringstream csv;
  csv.precision(12);
  for (std::size_t r = 0; r < problem.robots.size(); ++r) {
    for (int t = 0; t <= problem.num_steps; ++t) {
      csv << r << ',' << t;
      if (problem.robots[r].is_arm) {
        for (int j = 0; j < 3; ++j) csv << ',' << trajectories.arm_joints[r](t, j);
      } else {
        const Eigen::VectorXd& s = trajectories.belt_state[r];
        csv << ',' << s[0] + s[1] * t;
        for (Eigen::Index k = 2; k < s.size(); ++k) csv << ',' << s[k];
      }
      csv << '\n';
    }
  }
  return csv.str();
}

}  // namespace layopt
