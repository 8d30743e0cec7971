#pragma once

#include <Eigen/Core>

#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace layopt {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Ranged-row linear program: minimize cost'x subject to
/// row.lo <= a'x <= row.hi per row and lower <= x <= upper.
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> cost;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::string> var_names;

  struct Row {
    std::vector<std::pair<int, double>> terms;  ///< (variable, coefficient)
    double lo = -kInf;
    double hi = kInf;
    std::string name;
  };
  std::vector<Row> rows;

  int add_var(double lo, double hi, double c, std::string name = {});
  void add_row(Row row);
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  double objective = 0.0;
  Eigen::VectorXd x;  ///< structural variable values (empty unless optimal)
  long iterations = 0;
};

struct LpOptions {
  double feas_tol_row = 1e-7;    ///< row-activity feasibility
  double feas_tol_bound = 1e-9;  ///< variable-bound feasibility
  double dual_tol = 1e-9;        ///< reduced-cost optimality threshold
  long max_iterations = 200000;
};

/// Simplex basis snapshot: per-row basic column (-1 marks a row whose basic
/// column was solver-internal) and the bound status of every structural and
/// slack column (0 at lower, 1 at upper, 2 free, 3 basic). Feeding a parent
/// basis back in warm-starts the solve after bound changes.
struct LpBasis {
  std::vector<int> basic;
  std::vector<uint8_t> state;
};

/// Two-phase bounded-variable primal simplex. Deterministic: Devex pricing
/// with a two-pass ratio test that prefers well-conditioned pivots, switching
/// to Bland's rule after 10 * (rows + vars) degenerate pivots or after a
/// numerically dirty first pass.
LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options = {});

/// Same solver with variable bounds overridden (row data shared); used by
/// branch and bound so nodes do not copy the program. `warm_start` resumes
/// from a previous basis of the same program shape (ignored when it does not
/// fit); `basis_out`, when given, receives the optimal basis.
LpSolution solve_lp_bounded(const LinearProgram& lp,
                            const std::vector<double>& lower,
                            const std::vector<double>& upper,
                            const LpOptions& options = {},
                            const LpBasis* warm_start = nullptr,
                            LpBasis* basis_out = nullptr);

enum class MilpStatus { optimal, infeasible, timeout };

struct MilpSolution {
  MilpStatus status = MilpStatus::infeasible;
  double objective = kInf;
  double lower_bound = -kInf;  ///< proven bound; equals objective when optimal
  Eigen::VectorXd x;
  long nodes = 0;  ///< number of node relaxations solved (root counts as 1)
  std::vector<std::pair<long, double>> incumbent_history;  ///< (node, objective)
};

struct MilpOptions {
  double time_limit_s = 300.0;
  double abs_gap = 1e-6;
  double integrality_tol = 1e-6;
  LpOptions lp;
};

/// Best-first branch and bound over the listed binary variables. Node order:
/// lowest relaxation bound first, deeper node on ties (plunge), then creation
/// order. Branching: most fractional binary, ties by lowest variable index;
/// the one-fix child is created first so exact ties commit before they prune.
/// Fixed variables are folded into bounds and rows with at most one free
/// variable become bound updates before the search starts; child relaxations
/// warm-start from the parent basis. Fully deterministic.
MilpSolution solve_milp(const LinearProgram& lp,
                        const std::vector<int>& binary_vars,
                        const MilpOptions& options = {});

/// Result of parsing the LP-style text export (sections Minimize /
/// Subject To / Bounds / Binaries / End).
struct ParsedLp {
  LinearProgram lp;
  std::vector<int> binaries;
};

/// Parses the plain-text model format emitted by the network compiler.
/// Throws std::runtime_error on malformed input.
ParsedLp parse_lp_text(const std::string& text);

}  // namespace layopt
