#include "layopt/milp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <queue>
#include <stdexcept>

namespace layopt {

int LinearProgram::add_var(double lo, double hi, double c, std::string name) {
  lower.push_back(lo);
  upper.push_back(hi);
  cost.push_back(c);
  var_names.push_back(name.empty() ? "x" + std::to_string(num_vars)
                                   : std::move(name));
  return num_vars++;
}

void LinearProgram::add_row(Row row) { rows.push_back(std::move(row)); }

namespace {

// ---------------------------------------------------------------------------
// Bounded-variable two-phase primal simplex with an explicit dense basis
// inverse (product-form updates, periodic refactorization).
//
// Column layout: 0..n-1 structural, n..n+m-1 row slacks (coefficient -1 in
// their row, bounds = the row range), n+m..n+2m-1 phase-one artificials
// (coefficient +-1, enabled only for rows whose initial activity violates the
// range). The system is A x - s + D a = 0, so the start basis is diagonal.
// ---------------------------------------------------------------------------

constexpr double kPivTol = 1e-9;
constexpr double kDegenTol = 1e-12;
// Slack allowed on a basic variable's bound during the ratio test; trading a
// sub-tolerance violation for the freedom to pick a large pivot keeps the
// basis inverse well conditioned on degenerate instances.
constexpr double kRatioSlack = 1e-9;

class Simplex {
 public:
  Simplex(const LinearProgram& lp, const std::vector<double>& lower,
          const std::vector<double>& upper, const LpOptions& opt,
          const LpBasis* warm = nullptr, LpBasis* basis_out = nullptr)
      : lp_(lp),
        opt_(opt),
        n_(lp.num_vars),
        m_(static_cast<int>(lp.rows.size())),
        lower_(lower),
        upper_(upper),
        warm_(warm),
        basis_out_(basis_out) {
    total_ = n_ + 2 * m_;
    cols_.resize(n_);
    for (int r = 0; r < m_; ++r)
      for (const auto& [v, a] : lp_.rows[r].terms)
        if (a != 0.0) cols_[v].push_back({r, a});
  }

  LpSolution run();

 private:
  enum class VarState : uint8_t { basic, at_lower, at_upper, free_zero };

  double lo(int j) const {
    if (j < n_) return lower_[j];
    if (j < n_ + m_) return lp_.rows[j - n_].lo;
    return 0.0;
  }
  double hi(int j) const {
    if (j < n_) return upper_[j];
    if (j < n_ + m_) return lp_.rows[j - n_].hi;
    return art_hi_[j - n_ - m_];
  }

  template <typename Fn>
  void for_column(int j, Fn&& fn) const {
    if (j < n_) {
      for (const auto& [r, a] : cols_[j]) fn(r, a);
    } else if (j < n_ + m_) {
      fn(j - n_, -1.0);
    } else {
      fn(j - n_ - m_, art_sign_[j - n_ - m_]);
    }
  }

  enum class PhaseResult { done, unbounded, iteration_limit, failed };

  void init_basis();
  bool init_from_warm();
  void refactor();
  int price(const Eigen::VectorXd& y, int& direction) const;
  bool iterate(long& iterations, bool& unbounded);
  PhaseResult run_phase(long& iterations);
  double primal_infeasibility() const;
  double infeasibility_sum() const;
  void export_basis() const;

  const LinearProgram& lp_;
  LpOptions opt_;
  int n_, m_, total_;
  const std::vector<double>& lower_;
  const std::vector<double>& upper_;
  std::vector<std::vector<std::pair<int, double>>> cols_;

  std::vector<double> art_sign_;
  std::vector<double> art_hi_;
  std::vector<double> cost_;  // active phase costs over all columns
  std::vector<double> xval_;
  std::vector<VarState> state_;
  std::vector<int> basic_;  // per row: basic column
  std::vector<int> row_of_;  // per column: basic row or -1
  Eigen::MatrixXd binv_;
  std::vector<double> devex_;  // Devex reference weights, one per column
  double devex_max_ = 1.0;
  // Elastic repair of a warm-started basis: a basic variable outside its
  // bounds has the violated side widened (+1 above upper, -1 below lower)
  // and a phase-one cost pulling it back; the flag clears when it exits the
  // basis at the violated bound.
  std::vector<int8_t> elastic_side_;
  int elastic_count_ = 0;
  const LpBasis* warm_ = nullptr;
  LpBasis* basis_out_ = nullptr;
  long degenerate_pivots_ = 0;
  bool bland_ = false;
  bool numeric_fail_ = false;
  long pivots_since_refactor_ = 0;
};

void Simplex::init_basis() {
  xval_.assign(total_, 0.0);
  state_.assign(total_, VarState::at_lower);
  basic_.assign(m_, -1);
  row_of_.assign(total_, -1);
  art_sign_.assign(m_, 1.0);
  art_hi_.assign(m_, 0.0);
  elastic_side_.assign(total_, 0);
  elastic_count_ = 0;

  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lo(j))) {
      state_[j] = VarState::at_lower;
      xval_[j] = lo(j);
    } else if (std::isfinite(hi(j))) {
      state_[j] = VarState::at_upper;
      xval_[j] = hi(j);
    } else {
      state_[j] = VarState::free_zero;
      xval_[j] = 0.0;
    }
  }

  Eigen::VectorXd activity = Eigen::VectorXd::Zero(std::max(m_, 1));
  for (int j = 0; j < n_; ++j)
    if (xval_[j] != 0.0)
      for (const auto& [r, a] : cols_[j]) activity[r] += a * xval_[j];

  binv_ = Eigen::MatrixXd::Zero(m_, m_);
  for (int r = 0; r < m_; ++r) {
    const double t = activity[r];
    const double rlo = lp_.rows[r].lo;
    const double rhi = lp_.rows[r].hi;
    const int slack = n_ + r;
    const int art = n_ + m_ + r;
    if (t >= rlo - opt_.feas_tol_row && t <= rhi + opt_.feas_tol_row) {
      basic_[r] = slack;
      state_[slack] = VarState::basic;
      xval_[slack] = t;
      binv_(r, r) = -1.0;  // slack column is -e_r, self-inverse
    } else {
      const double clamped = std::clamp(t, rlo, rhi);
      xval_[slack] = clamped;
      state_[slack] = (clamped == rhi) ? VarState::at_upper : VarState::at_lower;
      // Row reads a*x - s + sign*art = 0  =>  art = (s - t)/sign; choose the
      // sign that makes the artificial nonnegative.
      art_sign_[r] = (clamped - t) > 0.0 ? 1.0 : -1.0;
      art_hi_[r] = kInf;
      basic_[r] = art;
      state_[art] = VarState::basic;
      xval_[art] = std::abs(clamped - t);
      binv_(r, r) = art_sign_[r];
    }
    row_of_[basic_[r]] = r;
  }
}

// Rebuilds the solver state from a caller-provided basis under the current
// bounds. Returns false when the snapshot does not fit this program.
bool Simplex::init_from_warm() {
  if (static_cast<int>(warm_->basic.size()) != m_ ||
      static_cast<int>(warm_->state.size()) != n_ + m_)
    return false;

  xval_.assign(total_, 0.0);
  state_.assign(total_, VarState::at_lower);
  basic_.assign(m_, -1);
  row_of_.assign(total_, -1);
  art_sign_.assign(m_, 1.0);
  art_hi_.assign(m_, 0.0);
  elastic_side_.assign(total_, 0);
  elastic_count_ = 0;
  numeric_fail_ = false;

  // Nonbasic columns snap to a bound that exists under the new bound set.
  for (int j = 0; j < n_ + m_; ++j) {
    const uint8_t st = warm_->state[j];
    if (st == 1 && std::isfinite(hi(j))) {
      state_[j] = VarState::at_upper;
      xval_[j] = hi(j);
    } else if (st != 2 && std::isfinite(lo(j))) {
      state_[j] = VarState::at_lower;
      xval_[j] = lo(j);
    } else if (std::isfinite(lo(j))) {
      state_[j] = VarState::at_lower;
      xval_[j] = lo(j);
    } else if (std::isfinite(hi(j))) {
      state_[j] = VarState::at_upper;
      xval_[j] = hi(j);
    } else {
      state_[j] = VarState::free_zero;
      xval_[j] = 0.0;
    }
  }
  for (int r = 0; r < m_; ++r) {
    int b = warm_->basic[r];
    if (b < 0 || b >= n_ + m_ || row_of_[b] >= 0) {
      b = n_ + m_ + r;  // unknown or duplicate: fall back to the artificial
      art_hi_[r] = kInf;
    }
    basic_[r] = b;
    row_of_[b] = r;
    state_[b] = VarState::basic;
  }
  refactor();  // also recomputes the basic values from the nonbasic point
  return !numeric_fail_;
}

void Simplex::export_basis() const {
  basis_out_->basic.assign(m_, -1);
  for (int r = 0; r < m_; ++r)
    if (basic_[r] < n_ + m_) basis_out_->basic[r] = basic_[r];
  basis_out_->state.assign(n_ + m_, 0);
  for (int j = 0; j < n_ + m_; ++j) {
    switch (state_[j]) {
      case VarState::at_lower: basis_out_->state[j] = 0; break;
      case VarState::at_upper: basis_out_->state[j] = 1; break;
      case VarState::free_zero: basis_out_->state[j] = 2; break;
      case VarState::basic: basis_out_->state[j] = 3; break;
    }
  }
}

void Simplex::refactor() {
  if (m_ == 0) return;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m_, m_);
  for (int r = 0; r < m_; ++r)
    for_column(basic_[r], [&](int row, double a) { b(row, r) = a; });
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
  binv_ = lu.inverse();
  // Recompute basic values from the nonbasic point to purge drift.
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
  for (int j = 0; j < total_; ++j) {
    if (state_[j] == VarState::basic || xval_[j] == 0.0) continue;
    for_column(j, [&](int row, double a) { rhs[row] -= a * xval_[j]; });
  }
  Eigen::VectorXd xb = binv_ * rhs;
  for (int r = 0; r < m_; ++r) xval_[basic_[r]] = xb[r];
  pivots_since_refactor_ = 0;
  if (!binv_.allFinite()) numeric_fail_ = true;  // singular basis
}

// Chooses the entering column; returns -1 at phase optimality. `direction`
// is +1 when the variable will increase, -1 when it will decrease. Columns
// are scored by the Devex criterion d^2 / weight, which approximates
// steepest-edge pricing and sidesteps the degenerate stalling that a plain
// largest-coefficient rule suffers on network-like bases.
int Simplex::price(const Eigen::VectorXd& y, int& direction) const {
  int best = -1;
  double best_score = 0.0;
  for (int j = 0; j < total_; ++j) {
    const VarState st = state_[j];
    if (st == VarState::basic) continue;
    if (hi(j) - lo(j) <= 0.0) continue;  // fixed
    double d = cost_[j];
    for_column(j, [&](int row, double a) { d -= y[row] * a; });
    int dir = 0;
    if (st == VarState::at_lower && d < -opt_.dual_tol)
      dir = 1;
    else if (st == VarState::at_upper && d > opt_.dual_tol)
      dir = -1;
    else if (st == VarState::free_zero && std::abs(d) > opt_.dual_tol)
      dir = d < 0.0 ? 1 : -1;
    if (dir == 0) continue;
    if (bland_) {
      direction = dir;
      return j;  // lowest eligible index
    }
    const double score = d * d / devex_[j];
    if (score > best_score * (1.0 + 1e-12)) {
      best_score = score;
      best = j;
      direction = dir;
    }
  }
  return best;
}

// One simplex iteration: price, ratio test, then pivot or bound flip.
// Returns false at phase optimality or on a numerical failure (numeric_fail_).
bool Simplex::iterate(long& iterations, bool& unbounded) {
  // BTRAN, exploiting that few basic columns carry a nonzero phase cost.
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m_);
  for (int r = 0; r < m_; ++r) {
    const double c = cost_[basic_[r]];
    if (c != 0.0) y.noalias() += c * binv_.row(r).transpose();
  }

  int direction = 0;
  const int q = price(y, direction);
  if (q < 0) return false;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(m_);
  for_column(q, [&](int row, double a) { w += a * binv_.col(row); });
  if (!w.allFinite()) {
    if (pivots_since_refactor_ > 0) {
      refactor();  // purge the poisoned inverse and retry the iteration
      return !numeric_fail_;
    }
    numeric_fail_ = true;
    return false;
  }

  // Two-pass ratio test. Pass one finds the longest step every basic
  // variable tolerates when its bound is relaxed by kRatioSlack; pass two
  // picks, among rows blocking within that step, the one with the largest
  // pivot magnitude. Basic i in row r moves at rate -direction*w_r per unit.
  // An elastic variable blocks only when approaching its violated bound,
  // where it exits the basis and its repair cost is lifted.
  const double span = hi(q) - lo(q);
  double theta_max = std::isfinite(span) ? span : kInf;
  for (int r = 0; r < m_; ++r) {
    const double rate = -direction * w[r];
    if (std::abs(rate) <= kPivTol) continue;
    const int b = basic_[r];
    const int es = elastic_side_[b];
    double limit;
    if (rate > 0.0) {
      if (es == 1) continue;  // widened upward
      const double bound = es == -1 ? lo(b) : hi(b);
      if (!std::isfinite(bound)) continue;
      limit = (bound + kRatioSlack - xval_[b]) / rate;
    } else {
      if (es == -1) continue;  // widened downward
      const double bound = es == 1 ? hi(b) : lo(b);
      if (!std::isfinite(bound)) continue;
      limit = (bound - kRatioSlack - xval_[b]) / rate;
    }
    theta_max = std::min(theta_max, std::max(limit, 0.0));
  }

  if (!std::isfinite(theta_max)) {
    unbounded = true;
    return false;
  }

  int block_row = -1;
  bool block_at_upper = false;
  double theta = theta_max;
  double best_piv = 0.0;
  for (int r = 0; r < m_; ++r) {
    const double rate = -direction * w[r];
    if (std::abs(rate) <= kPivTol) continue;
    const int b = basic_[r];
    const int es = elastic_side_[b];
    double limit;
    bool to_upper;
    if (rate > 0.0) {
      if (es == 1) continue;
      to_upper = es != -1;
      const double bound = to_upper ? hi(b) : lo(b);
      if (!std::isfinite(bound)) continue;
      limit = (bound - xval_[b]) / rate;
    } else {
      if (es == -1) continue;
      to_upper = es == 1;
      const double bound = to_upper ? hi(b) : lo(b);
      if (!std::isfinite(bound)) continue;
      limit = (bound - xval_[b]) / rate;
    }
    if (limit < 0.0) limit = 0.0;  // drift guard
    if (limit > theta_max + 1e-12) continue;
    const bool better =
        block_row < 0 ||
        (bland_ ? basic_[r] < basic_[block_row]
                : std::abs(w[r]) > best_piv + 1e-15);
    if (better) {
      block_row = r;
      block_at_upper = to_upper;
      best_piv = std::abs(w[r]);
      theta = std::min(theta_max, limit);
    }
  }

  // A suspiciously small pivot with a stale inverse: refactor and retry.
  if (block_row >= 0 && best_piv < 1e-7 && pivots_since_refactor_ > 0) {
    refactor();
    return !numeric_fail_;
  }

  ++iterations;
  if (theta <= kDegenTol && block_row >= 0) {
    ++degenerate_pivots_;
    if (degenerate_pivots_ > 10 * static_cast<long>(m_ + n_)) bland_ = true;
  }

  // Apply the step to the basic values and the entering variable.
  if (theta > 0.0) {
    for (int r = 0; r < m_; ++r) {
      const double rate = -direction * w[r];
      if (rate != 0.0) xval_[basic_[r]] += rate * theta;
    }
    xval_[q] += direction * theta;
  }

  if (block_row < 0) {
    // Bound flip: the entering variable traversed its whole range.
    state_[q] =
        (state_[q] == VarState::at_lower) ? VarState::at_upper : VarState::at_lower;
    xval_[q] = (state_[q] == VarState::at_lower) ? lo(q) : hi(q);
    return true;
  }

  const int leaving = basic_[block_row];
  state_[leaving] = block_at_upper ? VarState::at_upper : VarState::at_lower;
  xval_[leaving] = block_at_upper ? hi(leaving) : lo(leaving);
  row_of_[leaving] = -1;
  basic_[block_row] = q;
  row_of_[q] = block_row;
  state_[q] = VarState::basic;
  if (elastic_side_[leaving] != 0) {
    // A repaired variable landed back on its bound: drop the elastic cost.
    elastic_side_[leaving] = 0;
    --elastic_count_;
    cost_[leaving] = leaving >= n_ + m_ ? 1.0 : 0.0;
  }

  // Product-form update of the explicit inverse; columns whose pivot-row
  // entry vanishes are untouched, which the column-major layout makes cheap.
  const double piv = w[block_row];
  Eigen::RowVectorXd pivot_row = binv_.row(block_row) / piv;
  w[block_row] = 0.0;
  for (int j = 0; j < m_; ++j) {
    const double pj = pivot_row[j];
    if (std::abs(pj) > 1e-13) binv_.col(j).noalias() -= pj * w;
  }
  binv_.row(block_row) = pivot_row;

  // Devex weight propagation: tau_j is the pivot-row entry of column j in
  // the updated tableau, i.e. alpha_j / alpha_q of the classic update rule.
  if (!bland_) {
    const double gq = devex_[q];
    for (int j = 0; j < total_; ++j) {
      if (state_[j] == VarState::basic || j == leaving) continue;
      if (hi(j) - lo(j) <= 0.0) continue;
      double tau = 0.0;
      for_column(j, [&](int row, double a) { tau += pivot_row[row] * a; });
      if (tau == 0.0) continue;
      const double cand = tau * tau * gq;
      if (cand > devex_[j]) {
        devex_[j] = cand;
        devex_max_ = std::max(devex_max_, cand);
      }
    }
    const double gl = std::max(gq / (piv * piv), 1.0);
    devex_[leaving] = gl;
    devex_max_ = std::max(devex_max_, gl);
    if (devex_max_ > 1e8) {  // reference framework went stale: restart it
      devex_.assign(total_, 1.0);
      devex_max_ = 1.0;
    }
  }

  if (++pivots_since_refactor_ >= 8192) refactor();
  return true;
}

double Simplex::primal_infeasibility() const {
  double worst = 0.0;
  for (int r = 0; r < m_; ++r) {
    const int b = basic_[r];
    const double v = xval_[b];
    if (elastic_side_[b] != -1) worst = std::max(worst, lo(b) - v);
    if (elastic_side_[b] != +1) worst = std::max(worst, v - hi(b));
  }
  return worst;
}

// Total bound violation phase one must repair: artificial values plus the
// overshoot of any elastic basic variable beyond its relaxed bound.
double Simplex::infeasibility_sum() const {
  double sum = 0.0;
  for (int r = 0; r < m_; ++r)
    if (art_hi_[r] > 0.0) sum += std::abs(xval_[n_ + m_ + r]);
  for (int r = 0; r < m_; ++r) {
    const int b = basic_[r];
    if (elastic_side_[b] == +1) sum += std::max(0.0, xval_[b] - hi(b));
    else if (elastic_side_[b] == -1) sum += std::max(0.0, lo(b) - xval_[b]);
  }
  return sum;
}

// Pivots until the current phase objective is optimal or something stops it.
Simplex::PhaseResult Simplex::run_phase(long& iterations) {
  bool unbounded = false;
  while (true) {
    if (numeric_fail_) return PhaseResult::failed;
    if (!iterate(iterations, unbounded)) break;
    if (iterations >= opt_.max_iterations) return PhaseResult::iteration_limit;
    // Periodic drift check; a refactorization restores the basic values.
    if ((iterations & 255) == 0 && pivots_since_refactor_ >= 256 &&
        primal_infeasibility() > opt_.feas_tol_row)
      refactor();
  }
  if (numeric_fail_) return PhaseResult::failed;
  return unbounded ? PhaseResult::unbounded : PhaseResult::done;
}

LpSolution Simplex::run() {
  LpSolution sol;
  for (int j = 0; j < n_; ++j)
    if (lo(j) > hi(j) + opt_.feas_tol_bound) {
      sol.status = LpStatus::infeasible;
      return sol;
    }
  for (int r = 0; r < m_; ++r)
    if (lp_.rows[r].lo > lp_.rows[r].hi + opt_.feas_tol_row) {
      sol.status = LpStatus::infeasible;
      return sol;
    }

  // Attempt 0 prices with devex (warm-started when a basis was supplied); if
  // it ends numerically dirty, one deterministic cold restart under Bland's
  // rule settles the answer.
  long iterations = 0;
  for (int attempt = 0; attempt < 2; ++attempt) {
    bland_ = attempt > 0;
    degenerate_pivots_ = 0;
    numeric_fail_ = false;
    if (!(attempt == 0 && warm_ && init_from_warm())) {
      numeric_fail_ = false;
      init_basis();
    }

    // Phase 1: drive the artificials to zero. A warm basic variable pushed
    // outside its bounds by tighter child bounds is handled elastically: the
    // violated side is widened and a unit cost pulls the variable back until
    // it exits the basis at that bound.
    cost_.assign(total_, 0.0);
    devex_.assign(total_, 1.0);
    devex_max_ = 1.0;
    bool need_phase1 = false;
    for (int r = 0; r < m_; ++r)
      if (art_hi_[r] > 0.0) {
        cost_[n_ + m_ + r] = 1.0;
        need_phase1 = true;
      }
    for (int r = 0; r < m_; ++r) {
      const int b = basic_[r];
      if (b >= n_ + m_) continue;
      if (xval_[b] > hi(b) + opt_.feas_tol_row) {
        elastic_side_[b] = +1;
        cost_[b] = 1.0;
        ++elastic_count_;
        need_phase1 = true;
      } else if (xval_[b] < lo(b) - opt_.feas_tol_row) {
        elastic_side_[b] = -1;
        cost_[b] = -1.0;
        ++elastic_count_;
        need_phase1 = true;
      }
    }
    PhaseResult pr = PhaseResult::done;
    if (need_phase1) {
      bool infeasible = false;
      for (int round = 0; round < 3; ++round) {
        pr = run_phase(iterations);
        if (pr != PhaseResult::done) break;
        refactor();  // purge drift before judging feasibility
        if (numeric_fail_) {
          pr = PhaseResult::failed;
          break;
        }
        if (infeasibility_sum() <= opt_.feas_tol_row) break;
        infeasible = true;  // confirmed unless a later round clears it
      }
      if (pr == PhaseResult::iteration_limit) {
        sol.status = LpStatus::iteration_limit;
        sol.iterations = iterations;
        return sol;
      }
      if (pr == PhaseResult::done && infeasible &&
          infeasibility_sum() > opt_.feas_tol_row) {
        sol.status = LpStatus::infeasible;
        sol.iterations = iterations;
        return sol;
      }
      if (pr != PhaseResult::done) continue;  // failed or "unbounded": retry
      for (int r = 0; r < m_; ++r) art_hi_[r] = 0.0;  // lock artificials
      if (elastic_count_ > 0) {  // residuals are within tolerance by now
        elastic_side_.assign(total_, 0);
        elastic_count_ = 0;
      }
    }

    // Phase 2: the real objective.
    cost_.assign(total_, 0.0);
    for (int j = 0; j < n_; ++j) cost_[j] = lp_.cost[j];
    devex_.assign(total_, 1.0);
    devex_max_ = 1.0;
    pr = run_phase(iterations);
    if (pr == PhaseResult::iteration_limit) {
      sol.status = LpStatus::iteration_limit;
      sol.iterations = iterations;
      return sol;
    }
    if (pr == PhaseResult::unbounded) {
      sol.status = LpStatus::unbounded;
      sol.iterations = iterations;
      return sol;
    }
    if (pr == PhaseResult::failed) continue;

    // Accept only a numerically clean optimum; cleanup pivots are allowed
    // once after the refactorization tightens the basic values.
    bool clean = false;
    for (int round = 0; round < 2; ++round) {
      refactor();
      if (numeric_fail_) break;
      if (primal_infeasibility() <= 10.0 * opt_.feas_tol_row) {
        clean = true;
        break;
      }
      pr = run_phase(iterations);
      if (pr == PhaseResult::iteration_limit) {
        sol.status = LpStatus::iteration_limit;
        sol.iterations = iterations;
        return sol;
      }
      if (pr != PhaseResult::done) break;
    }
    if (!clean) continue;

    double obj = 0.0;
    for (int j = 0; j < n_; ++j) obj += lp_.cost[j] * xval_[j];
    if (!std::isfinite(obj)) continue;

    sol.status = LpStatus::optimal;
    sol.iterations = iterations;
    sol.x = Eigen::VectorXd(n_);
    for (int j = 0; j < n_; ++j) sol.x[j] = xval_[j];
    sol.objective = obj;
    if (basis_out_) export_basis();
    return sol;
  }

  // Both attempts ended dirty; report the honest non-answer.
  sol.status = LpStatus::iteration_limit;
  sol.iterations = iterations;
  return sol;
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options) {
  return Simplex(lp, lp.lower, lp.upper, options).run();
}

LpSolution solve_lp_bounded(const LinearProgram& lp,
                            const std::vector<double>& lower,
                            const std::vector<double>& upper,
                            const LpOptions& options, const LpBasis* warm_start,
                            LpBasis* basis_out) {
  return Simplex(lp, lower, upper, options, warm_start, basis_out).run();
}

// ---------------------------------------------------------------------------
// Branch and bound
// ---------------------------------------------------------------------------

namespace {

struct BnbNode {
  double bound = kInf;      // relaxation objective, granularity-lifted
  double objective = kInf;  // relaxation objective as solved
  int depth = 0;
  long seq = 0;
  std::vector<std::pair<int, double>> fixes;  // (var, value)
  Eigen::VectorXd x;
  std::shared_ptr<LpBasis> basis;  // optimal basis of this node's relaxation
};

struct NodeOrder {
  bool operator()(const BnbNode& a, const BnbNode& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
    if (a.depth != b.depth) return a.depth < b.depth;  // deeper first (plunge)
    return a.seq > b.seq;                              // then creation order
  }
};

// Folds fixed variables into constants and turns rows with a single free
// variable into bound updates. Returns false when a row or bound proves the
// program infeasible outright.
bool presolve_rows(const LinearProgram& lp, std::vector<double>& lower,
                   std::vector<double>& upper, LinearProgram& reduced,
                   const LpOptions& lpopt) {
  const int n = lp.num_vars;
  auto fixed = [&](int v) { return upper[v] - lower[v] <= 0.0; };
  std::vector<char> row_done(lp.rows.size(), 0);
  for (int pass = 0; pass < 3; ++pass) {
    bool changed = false;
    for (size_t r = 0; r < lp.rows.size(); ++r) {
      if (row_done[r]) continue;
      double constant = 0.0;
      int free_var = -1, free_count = 0;
      double free_coef = 0.0;
      for (const auto& [v, a] : lp.rows[r].terms) {
        if (fixed(v)) {
          constant += a * lower[v];
        } else {
          ++free_count;
          free_var = v;
          free_coef = a;
        }
      }
      if (free_count > 1) continue;
      row_done[r] = 1;
      changed = true;
      const double lo = lp.rows[r].lo - constant;
      const double hi = lp.rows[r].hi - constant;
      if (free_count == 0) {
        if (lo > lpopt.feas_tol_row || hi < -lpopt.feas_tol_row) return false;
        continue;
      }
      double vlo = -kInf, vhi = kInf;
      if (free_coef > 0.0) {
        if (std::isfinite(lo)) vlo = lo / free_coef;
        if (std::isfinite(hi)) vhi = hi / free_coef;
      } else {
        if (std::isfinite(hi)) vlo = hi / free_coef;
        if (std::isfinite(lo)) vhi = lo / free_coef;
      }
      lower[free_var] = std::max(lower[free_var], vlo);
      upper[free_var] = std::min(upper[free_var], vhi);
      if (lower[free_var] > upper[free_var] + lpopt.feas_tol_bound)
        return false;
    }
    if (!changed) break;
  }
  reduced.num_vars = n;
  reduced.cost = lp.cost;
  reduced.lower = lower;
  reduced.upper = upper;
  reduced.var_names = lp.var_names;
  for (size_t r = 0; r < lp.rows.size(); ++r) {
    if (row_done[r]) continue;
    LinearProgram::Row row;
    row.name = lp.rows[r].name;
    double constant = 0.0;
    for (const auto& [v, a] : lp.rows[r].terms) {
      if (fixed(v))
        constant += a * lower[v];
      else
        row.terms.push_back({v, a});
    }
    row.lo = lp.rows[r].lo - constant;
    row.hi = lp.rows[r].hi - constant;
    reduced.add_row(std::move(row));
  }
  return true;
}

}  // namespace

MilpSolution solve_milp(const LinearProgram& lp,
                        const std::vector<int>& binary_vars,
                        const MilpOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  MilpSolution out;
  std::vector<double> root_lower = lp.lower;
  std::vector<double> root_upper = lp.upper;
  LinearProgram reduced;
  if (!presolve_rows(lp, root_lower, root_upper, reduced, options.lp)) {
    out.status = MilpStatus::infeasible;
    return out;
  }

  // Objective granularity: when every cost sits on an integer variable and
  // all costs are integer multiples of the smallest one, every integral
  // solution's objective lies on that grid, so a relaxation bound may be
  // lifted to the next multiple. Typical payoff: unit-cost arm scenes, where
  // fractional bounds like 7.5 legitimately become 8.
  double granularity = 0.0;
  {
    std::vector<char> is_binary(lp.num_vars, 0);
    for (int v : binary_vars) is_binary[v] = 1;
    bool costs_on_binaries = true;
    for (int v = 0; v < lp.num_vars; ++v)
      if (lp.cost[v] != 0.0 && !is_binary[v]) costs_on_binaries = false;
    if (costs_on_binaries) {
      double smallest = kInf;
      for (int v : binary_vars)
        if (std::abs(lp.cost[v]) > 1e-12)
          smallest = std::min(smallest, std::abs(lp.cost[v]));
      if (std::isfinite(smallest)) {
        bool on_grid = true;
        for (int v : binary_vars) {
          const double ratio = lp.cost[v] / smallest;
          if (std::abs(ratio - std::round(ratio)) > 1e-9) on_grid = false;
        }
        if (on_grid) granularity = smallest;
      }
    }
  }
  auto lift = [&](double bound) {
    if (granularity <= 0.0) return bound;
    return granularity * std::ceil(bound / granularity - 1e-9);
  };

  // Most fractional binary; ties fall to the earliest index because only a
  // strict improvement replaces the running best.
  auto fractional_var = [&](const Eigen::VectorXd& x) {
    int best = -1;
    double best_dist = options.integrality_tol;
    for (int v : binary_vars) {
      const double frac = x[v] - std::floor(x[v]);
      const double dist = std::min(frac, 1.0 - frac);
      if (dist > best_dist + 1e-15) {
        best = v;
        best_dist = dist;
      }
    }
    return best;
  };

  std::priority_queue<BnbNode, std::vector<BnbNode>, NodeOrder> open;
  long seq = 0;
  bool hit_timeout = false;

  auto root_basis = std::make_shared<LpBasis>();
  LpSolution root = solve_lp_bounded(reduced, root_lower, root_upper,
                                     options.lp, nullptr, root_basis.get());
  out.nodes = 1;
  if (root.status == LpStatus::infeasible) {
    out.status = MilpStatus::infeasible;
    return out;
  }
  if (root.status == LpStatus::unbounded)
    throw std::runtime_error("solve_milp: relaxation is unbounded");
  if (root.status == LpStatus::iteration_limit) {
    out.status = MilpStatus::timeout;
    return out;
  }

  double incumbent = kInf;
  Eigen::VectorXd best_x;
  double timeout_bound = kInf;  // tightest open bound when a limit is hit

  BnbNode root_node;
  root_node.bound = lift(root.objective);
  root_node.objective = root.objective;
  root_node.depth = 0;
  root_node.seq = seq++;
  root_node.x = root.x;
  root_node.basis = root_basis;
  open.push(std::move(root_node));

  std::vector<double> node_lower, node_upper;
  while (!open.empty()) {
    if (elapsed() > options.time_limit_s) {
      hit_timeout = true;
      timeout_bound = open.top().bound;
      break;
    }
    BnbNode node = open.top();
    open.pop();
    if (node.bound >= incumbent - options.abs_gap) continue;

    const int frac = fractional_var(node.x);
    if (frac < 0) {
      if (node.objective < incumbent - 1e-12) {
        incumbent = node.objective;
        best_x = node.x;
        out.incumbent_history.push_back({out.nodes, incumbent});
      }
      continue;
    }

    // The one-fix child goes first so ties in bound commit a placement before
    // they are pruned; each child warm-starts from the parent's basis.
    for (int value = 1; value >= 0; --value) {
      node_lower = root_lower;
      node_upper = root_upper;
      for (const auto& [v, val] : node.fixes) {
        node_lower[v] = val;
        node_upper[v] = val;
      }
      node_lower[frac] = value;
      node_upper[frac] = value;

      auto child_basis = std::make_shared<LpBasis>();
      LpSolution child =
          solve_lp_bounded(reduced, node_lower, node_upper, options.lp,
                           node.basis.get(), child_basis.get());
      ++out.nodes;
      if (child.status == LpStatus::infeasible) continue;
      if (child.status == LpStatus::iteration_limit) {
        hit_timeout = true;
        timeout_bound = node.bound;
        break;
      }
      if (child.status == LpStatus::unbounded)
        throw std::runtime_error("solve_milp: relaxation is unbounded");
      if (lift(child.objective) >= incumbent - options.abs_gap) continue;
      BnbNode next;
      next.bound = lift(child.objective);
      next.objective = child.objective;
      next.depth = node.depth + 1;
      next.seq = seq++;
      next.fixes = node.fixes;
      next.fixes.push_back({frac, static_cast<double>(value)});
      next.x = child.x;
      next.basis = std::move(child_basis);
      open.push(std::move(next));
    }
    if (hit_timeout) break;
  }

  if (hit_timeout) {
    out.status = MilpStatus::timeout;
    out.objective = incumbent;
    out.lower_bound = std::min(timeout_bound, incumbent);
    if (std::isfinite(incumbent)) out.x = best_x;
    return out;
  }
  if (!std::isfinite(incumbent)) {
    out.status = MilpStatus::infeasible;
    return out;
  }
  out.status = MilpStatus::optimal;
  out.objective = incumbent;
  out.lower_bound = incumbent;
  out.x = best_x;
  return out;
}

// ---------------------------------------------------------------------------
// LP-style text parsing
// ---------------------------------------------------------------------------

namespace {

struct Token {
  enum class Kind { number, name, sign, op } kind;
  double value = 0.0;
  std::string text;
};

bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> tokens;
  size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '+' || c == '-') {
      tokens.push_back({Token::Kind::sign, c == '+' ? 1.0 : -1.0, {c}});
      ++i;
      continue;
    }
    if (c == '<' || c == '>' || c == '=') {
      std::string op(1, c);
      if (i + 1 < line.size() && line[i + 1] == '=') {
        op += '=';
        ++i;
      }
      tokens.push_back({Token::Kind::op, 0.0, op});
      ++i;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t end = i;
      while (end < line.size() &&
             (std::isdigit(static_cast<unsigned char>(line[end])) ||
              line[end] == '.' || line[end] == 'e' || line[end] == 'E' ||
              ((line[end] == '+' || line[end] == '-') && end > i &&
               (line[end - 1] == 'e' || line[end - 1] == 'E'))))
        ++end;
      tokens.push_back(
          {Token::Kind::number, std::stod(line.substr(i, end - i)),
           line.substr(i, end - i)});
      i = end;
      continue;
    }
    if (name_char(c)) {
      size_t end = i;
      while (end < line.size() && name_char(line[end])) ++end;
      tokens.push_back({Token::Kind::name, 0.0, line.substr(i, end - i)});
      i = end;
      continue;
    }
    throw std::runtime_error("parse_lp_text: unexpected character '" +
                             std::string(1, c) + "'");
  }
  return tokens;
}

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

ParsedLp parse_lp_text(const std::string& text) {
  ParsedLp out;
  std::map<std::string, int> var_ids;
  auto var_id = [&](const std::string& name) {
    auto it = var_ids.find(name);
    if (it != var_ids.end()) return it->second;
    const int id = out.lp.add_var(0.0, kInf, 0.0, name);
    var_ids.emplace(name, id);
    return id;
  };

  enum class Section { none, objective, rows, bounds, binaries, done };
  Section section = Section::none;

  std::istringstream stream(text);
  std::string raw;
  while (std::getline(stream, raw)) {
    // Strip comments and whitespace.
    const size_t comment = raw.find('\\');
    if (comment != std::string::npos) raw.resize(comment);
    size_t begin = raw.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    size_t end = raw.find_last_not_of(" \t\r");
    std::string line = raw.substr(begin, end - begin + 1);
    const std::string low = lowercase(line);
    if (low == "minimize" || low == "min") {
      section = Section::objective;
      continue;
    }
    if (low == "subject to" || low == "st" || low == "s.t.") {
      section = Section::rows;
      continue;
    }
    if (low == "bounds" || low == "bound") {
      section = Section::bounds;
      continue;
    }
    if (low == "binaries" || low == "binary" || low == "bin") {
      section = Section::binaries;
      continue;
    }
    if (low == "end") {
      section = Section::done;
      continue;
    }

    // Peel an optional "name:" label.
    std::string label;
    const size_t colon = line.find(':');
    if ((section == Section::objective || section == Section::rows) &&
        colon != std::string::npos) {
      label = line.substr(0, colon);
      line = line.substr(colon + 1);
    }

    std::vector<Token> tokens = tokenize(line);
    switch (section) {
      case Section::objective: {
        double sign = 1.0;
        double coef = 1.0;
        bool have_coef = false;
        for (const auto& tok : tokens) {
          if (tok.kind == Token::Kind::sign) {
            sign = tok.value;
            coef = 1.0;
            have_coef = false;
          } else if (tok.kind == Token::Kind::number) {
            coef = tok.value;
            have_coef = true;
          } else if (tok.kind == Token::Kind::name) {
            out.lp.cost[var_id(tok.text)] += sign * (have_coef ? coef : 1.0);
            sign = 1.0;
            coef = 1.0;
            have_coef = false;
          } else {
            throw std::runtime_error("parse_lp_text: bad objective token");
          }
        }
        break;
      }
      case Section::rows: {
        LinearProgram::Row row;
        row.name = label;
        double sign = 1.0;
        double coef = 1.0;
        bool have_coef = false;
        std::string op;
        double rhs = 0.0;
        bool have_rhs = false;
        for (const auto& tok : tokens) {
          if (tok.kind == Token::Kind::op) {
            op = tok.text;
          } else if (!op.empty()) {
            double value = tok.value;
            if (tok.kind == Token::Kind::sign) {
              sign = tok.value;
              continue;
            }
            if (tok.kind != Token::Kind::number)
              throw std::runtime_error("parse_lp_text: bad rhs");
            rhs = sign * value;
            sign = 1.0;
            have_rhs = true;
          } else if (tok.kind == Token::Kind::sign) {
            sign = tok.value;
            coef = 1.0;
            have_coef = false;
          } else if (tok.kind == Token::Kind::number) {
            coef = tok.value;
            have_coef = true;
          } else if (tok.kind == Token::Kind::name) {
            row.terms.push_back({var_id(tok.text), sign * (have_coef ? coef : 1.0)});
            sign = 1.0;
            coef = 1.0;
            have_coef = false;
          }
        }
        if (!have_rhs || op.empty())
          throw std::runtime_error("parse_lp_text: constraint without rhs");
        if (op == "<=" || op == "<")
          row.hi = rhs;
        else if (op == ">=" || op == ">")
          row.lo = rhs;
        else if (op == "=" || op == "==") {
          row.lo = rhs;
          row.hi = rhs;
        } else {
          throw std::runtime_error("parse_lp_text: unknown operator " + op);
        }
        out.lp.add_row(std::move(row));
        break;
      }
      case Section::bounds: {
        // Forms: "lo <= x <= hi", "x <= hi", "x >= lo", "x = v", "x free".
        if (tokens.size() == 2 && tokens[0].kind == Token::Kind::name &&
            tokens[1].kind == Token::Kind::name &&
            lowercase(tokens[1].text) == "free") {
          const int v = var_id(tokens[0].text);
          out.lp.lower[v] = -kInf;
          out.lp.upper[v] = kInf;
          break;
        }
        std::vector<double> numbers;
        std::vector<std::string> ops;
        int var = -1;
        int var_pos = -1;
        double sign = 1.0;
        int pos = 0;
        for (const auto& tok : tokens) {
          if (tok.kind == Token::Kind::sign) {
            sign = tok.value;
            continue;
          }
          if (tok.kind == Token::Kind::number) {
            numbers.push_back(sign * tok.value);
            sign = 1.0;
          } else if (tok.kind == Token::Kind::name) {
            if (lowercase(tok.text) == "inf") {
              numbers.push_back(sign * kInf);
              sign = 1.0;
            } else {
              var = var_id(tok.text);
              var_pos = pos;
            }
          } else if (tok.kind == Token::Kind::op) {
            ops.push_back(tok.text);
          }
          ++pos;
        }
        if (var < 0) throw std::runtime_error("parse_lp_text: bad bound line");
        if (ops.size() == 2 && numbers.size() == 2) {
          out.lp.lower[var] = numbers[0];
          out.lp.upper[var] = numbers[1];
        } else if (ops.size() == 1 && numbers.size() == 1) {
          const bool var_first = var_pos == 0;
          const std::string& op = ops[0];
          if (op == "=") {
            out.lp.lower[var] = numbers[0];
            out.lp.upper[var] = numbers[0];
          } else if ((op == "<=" && var_first) || (op == ">=" && !var_first)) {
            out.lp.upper[var] = numbers[0];
          } else {
            out.lp.lower[var] = numbers[0];
          }
        } else {
          throw std::runtime_error("parse_lp_text: bad bound line");
        }
        break;
      }
      case Section::binaries: {
        for (const auto& tok : tokens) {
          if (tok.kind != Token::Kind::name)
            throw std::runtime_error("parse_lp_text: bad binaries line");
          const int v = var_id(tok.text);
          out.binaries.push_back(v);
          if (!std::isfinite(out.lp.upper[v])) out.lp.upper[v] = 1.0;
          out.lp.lower[v] = std::max(out.lp.lower[v], 0.0);
          out.lp.upper[v] = std::min(out.lp.upper[v], 1.0);
        }
        break;
      }
      case Section::none:
      case Section::done:
        throw std::runtime_error("parse_lp_text: content outside sections");
    }
  }
  return out;
}

}  // namespace layopt
