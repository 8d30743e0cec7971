#pragma once

#include "layopt/sched.hpp"

#include <string>
#include <vector>

namespace layopt {

/// Planar pose of an end effector or a carried box.
struct PlanarPose {
  Vec2 position{0.0, 0.0};
  double heading = 0.0;  ///< radians, not wrapped
};

/// Three-revolute planar arm. Joint k rotates all links from k on, so the
/// effector heading is the plain sum of the joint angles; link lengths sum
/// to the arm's maximum reach.
struct PlanarArm {
  Vec2 base{0.0, 0.0};
  Eigen::Vector3d links{0.0, 0.0, 0.0};
  double joint_limit = 0.0;  ///< symmetric bound: |joint k| <= joint_limit
};

/// Effector pose for one joint vector: the links are chained at cumulative
/// angles, and the heading is the sum of all three joints.
PlanarPose forward_kinematics(const PlanarArm& arm,
                              const Eigen::Vector3d& joints);

/// Straight conveyor segment. The box coordinate along the track is the
/// shared prismatic state (affine in time) plus one constant grasp offset
/// per carried box, measured from the track midpoint.
struct BeltTrack {
  Vec2 tail{0.0, 0.0};  ///< motor end (the placement anchor)
  Vec2 head{0.0, 0.0};

  double length() const { return (head - tail).norm(); }
  Vec2 direction() const { return (head - tail).normalized(); }
  /// World pose of a box sitting `along` meters from the midpoint.
  PlanarPose pose_at(double along) const;
};

/// One element of the layout as it appears in the trajectory problem.
struct MotionRobot {
  int placement = -1;  ///< placement index in the reach graph
  bool is_arm = true;
  PlanarArm arm;    ///< valid when is_arm
  BeltTrack belt;   ///< valid when !is_arm
  double disc_radius = 0.0;  ///< collision disc radius (arms only)
  std::vector<int> boxes;    ///< belts: boxes carried, one grasp offset each
};

/// Effector meets a box at a port: pick at the input, place at the box's
/// output. Only the position is constrained; the pose's heading records
/// the outward grasp axis and seeds the solver's initial guess.
struct GraspEvent {
  int robot = -1;
  int step = 0;
  int box = -1;
  PlanarPose pose;
};

/// Giver and receiver effectors coincide at the step with opposed headings
/// (the receiver grips the box from the other side).
struct HandoverEvent {
  int giver = -1;
  int receiver = -1;
  int step = 0;
  int box = -1;
};

/// One time step during which a belt carries a box: the box coordinate must
/// stay strictly inside (-length/2, length/2).
struct OnBeltStep {
  int robot = -1;
  int box = -1;
  int step = 0;
};

/// Pair of collision discs that must keep a positive clearance at every
/// step. Discs 0..5 sit at the quarter points of the three links.
struct DiscPair {
  int robot_a = -1;
  int disc_a = 0;
  int robot_b = -1;
  int disc_b = 0;
};

/// Discretized trajectory problem for one schedule: every robot gets a state
/// per knot (arms: three joints; belts: an affine prismatic profile plus one
/// grasp offset per box), tied together by grasp, handover, on-belt, joint
/// limit, and collision constraints.
struct MotionProblem {
  int num_steps = 0;      ///< knots run 0..num_steps inclusive
  double step_time = 0.1; ///< seconds per step
  double beta_velocity = 1.0;
  double beta_acceleration = 0.1;
  std::vector<MotionRobot> robots;
  std::vector<GraspEvent> picks;
  std::vector<GraspEvent> places;
  std::vector<HandoverEvent> handovers;
  std::vector<OnBeltStep> rides;
  std::vector<DiscPair> disc_pairs;
};

/// Expands a schedule over a layout into a MotionProblem: a pick where each
/// box's first task starts, a place where its last task ends, a handover at
/// every interior task boundary, an on-belt bound at every step a belt
/// holds a box (boundary steps included), and collision discs paired across
/// distinct arms plus the non-adjacent links of each arm. Pairs whose discs
/// can never meet (bases too far apart at full stretch) are dropped, as are
/// cross-arm pairs of the two last links, which must touch at handovers.
MotionProblem build_motion_problem(const Schedule& schedule,
                                   const Layout& layout, const Scene& scene,
                                   int steps_per_slot = 10);

/// Solver knobs: the constraint penalties start at penalty_init and grow by
/// penalty_growth each round until the worst constraint residual drops
/// below tolerance; each round runs damped Gauss-Newton with Armijo
/// backtracking until the step norm stalls.
struct MotionParams {
  double tolerance = 1e-3;
  double margin = 1e-3;  ///< inequalities are pushed to at least this slack
  /// Starting penalty weight. The initial guess already sits close to the
  /// constraint manifold, so the penalties start strong enough to keep it
  /// there; a weak start lets the smoothness term drag the iterate into
  /// tangled configurations the ramp cannot undo.
  double penalty_init = 1e4;
  double penalty_growth = 10.0;
  int penalty_rounds = 8;
  int max_iterations = 200;
  int max_halvings = 30;
  double step_tolerance = 1e-8;
};

/// Solved trajectories: per-knot joint rows for arms, the affine prismatic
/// profile plus grasp offsets for belts.
struct Trajectories {
  std::vector<Eigen::MatrixXd> arm_joints;  ///< arms: (num_steps+1) x 3
  std::vector<Eigen::VectorXd> belt_state;  ///< belts: [shift, rate, offsets...]
  double objective = 0.0;       ///< smoothness cost at the solution
  double worst_residual = 0.0;  ///< largest constraint violation
  std::string worst_constraint;
  long iterations = 0;
  /// Penalized objective after each accepted step, one list per penalty
  /// round; non-increasing within a round by the line-search guarantee.
  std::vector<std::vector<double>> round_objectives;
};

/// Minimizes squared finite-difference velocity and acceleration under
/// quadratic equality and cubic inequality penalties. Throws
/// std::runtime_error("residual failure: ...") naming the worst constraint
/// when the final residual still exceeds params.tolerance — the signature
/// of a schedule step the hardware cannot execute.
Trajectories solve_trajectories(const MotionProblem& problem,
                                const MotionParams& params = {});

/// Flat variable layout used by the objective/gradient entry points below:
/// arms contribute 3*(num_steps+1) joints, belts 2 + #boxes values.
int motion_variable_count(const MotionProblem& problem);

/// Deterministic starting point: arms hold an inverse-kinematics fit of
/// their first pinned pose at every knot, belts start centered.
Eigen::VectorXd motion_initial_guess(const MotionProblem& problem);

/// Penalized objective at a flat variable vector: smoothness plus
/// mu_equality * (violation^2) over grasp/handover rows and
/// mu_inequality * (shortfall^3) over on-belt, joint limit and collision
/// rows (shortfall measured against `margin`). Zero multipliers give the
/// bare smoothness objective.
double motion_objective(const MotionProblem& problem,
                        const Eigen::VectorXd& vars, double mu_equality,
                        double mu_inequality, double margin = 1e-3);

/// Analytic gradient of motion_objective, same argument conventions.
Eigen::VectorXd motion_gradient(const MotionProblem& problem,
                                const Eigen::VectorXd& vars,
                                double mu_equality, double mu_inequality,
                                double margin = 1e-3);

/// Headerless CSV, one row per robot per knot: "robot,step,values..." where
/// arms list their three joints and belts list the prismatic coordinate
/// followed by every grasp offset (constant across rows).
std::string write_trajectory_csv(const MotionProblem& problem,
                                 const Trajectories& trajectories);

}  // namespace layopt
