#include "wncs/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <omp.h>

namespace wncs::lp {

std::size_t LpProblem::add_variable() {
  for (auto& r : equalities) r.coeffs.push_back(0.0);
  for (auto& r : inequalities) r.coeffs.push_back(0.0);
  if (!objective.empty()) objective.push_back(0.0);
  return num_vars++;
}

const char* to_string(Status s) {
  switch (s) {
    case Status::Feasible: return "feasible";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::SolverFailure: return "solver-failure";
  }
  return "unknown";
}

namespace {

enum class Pass { Optimal, Unbounded, PivotLimit };

constexpr double kRhsClamp = 1e-12;
constexpr double kHarrisTol = 1e-12;
constexpr double kDropTol = 1e-14;
constexpr double kSingularTol = 1e-13;
constexpr long kRefactorInterval = 50;

int thread_count(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

// Dense tableau B^{-1} [A | b] kept next to the original [A | b]. Every
// kRefactorInterval pivots, and before a phase is declared optimal, the
// tableau is rebuilt from the original rows through an LU solve of the
// current basis, so elimination round-off cannot accumulate.
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), width_(cols + 1), data_(rows * (cols + 1), 0.0),
        objective_(cols + 1, 0.0), cost_(cols, 0.0), basis_(rows, 0) {}

  double& at(std::size_t r, std::size_t c) { return data_[r * width_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * width_ + c]; }
  double& rhs(std::size_t r) { return at(r, cols_); }
  double rhs(std::size_t r) const { return at(r, cols_); }
  const std::vector<double>& objective() const { return objective_; }
  std::vector<std::size_t>& basis() { return basis_; }

  // Call once the initial rows and basis are in place.
  void freeze_original() { original_ = data_; }

  // Installs the maximization cost and rebuilds the reduced-cost row
  // z_j - c_j = sum_i c_{B_i} T_ij - c_j (the last entry is the objective value).
  void set_cost(std::vector<double> cost) {
    cost_ = std::move(cost);
    refresh_objective();
  }

  void pivot(std::size_t pivot_row, std::size_t col, bool parallel, int threads) {
    double* prow = &data_[pivot_row * width_];
    const double inv = 1.0 / prow[col];
    for (std::size_t c = 0; c < width_; ++c) prow[c] *= inv;
    prow[col] = 1.0;

    const auto n = static_cast<std::int64_t>(rows_);
    const std::size_t w = width_;
    double* base = data_.data();
    auto eliminate = [&](double* row) {
      const double f = row[col];
      if (f == 0.0) return;
      for (std::size_t c = 0; c < w; ++c) {
        row[c] -= f * prow[c];
        if (std::abs(row[c]) < kDropTol) row[c] = 0.0;
      }
      row[col] = 0.0;
      // A basic value a hair below zero is zero.
      if (row[w - 1] < 0.0 && row[w - 1] > -kRhsClamp) row[w - 1] = 0.0;
    };
    // Rows are independent, so the parallel loop yields the serial bits.
    if (parallel) {
#pragma omp parallel for schedule(static) num_threads(thread_count(threads))
      for (std::int64_t r = 0; r < n; ++r)
        if (static_cast<std::size_t>(r) != pivot_row) eliminate(base + r * w);
    } else {
      for (std::int64_t r = 0; r < n; ++r)
        if (static_cast<std::size_t>(r) != pivot_row) eliminate(base + r * w);
    }
    const double f = objective_[col];
    if (f != 0.0)
      for (std::size_t c = 0; c < w; ++c) objective_[c] -= f * prow[c];
    objective_[col] = 0.0;
    basis_[pivot_row] = col;
  }

  // Rebuilds B^{-1} [A | b] from the original rows. Returns false (and keeps
  // the current tableau) if the basis matrix is numerically singular.
  bool reinvert(bool parallel, int threads) {
    const std::size_t m = rows_;
    if (m == 0) return true;
    std::vector<double> lu(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < m; ++k) lu[i * m + k] = original_[i * width_ + basis_[k]];
    std::vector<std::size_t> perm(m);
    for (std::size_t i = 0; i < m; ++i) perm[i] = i;
    for (std::size_t k = 0; k < m; ++k) {
      std::size_t piv = k;
      for (std::size_t i = k + 1; i < m; ++i)
        if (std::abs(lu[i * m + k]) > std::abs(lu[piv * m + k])) piv = i;
      if (std::abs(lu[piv * m + k]) < kSingularTol) return false;
      if (piv != k) {
        for (std::size_t c = 0; c < m; ++c) std::swap(lu[k * m + c], lu[piv * m + c]);
        std::swap(perm[k], perm[piv]);
      }
      const double d = lu[k * m + k];
      for (std::size_t i = k + 1; i < m; ++i) {
        const double f = lu[i * m + k] / d;
        lu[i * m + k] = f;
        if (f == 0.0) continue;
        for (std::size_t c = k + 1; c < m; ++c) lu[i * m + c] -= f * lu[k * m + c];
      }
    }

    const auto width = static_cast<std::int64_t>(width_);
    auto solve_column = [&](std::int64_t j, std::vector<double>& y) {
      for (std::size_t i = 0; i < m; ++i) y[i] = original_[perm[i] * width_ + static_cast<std::size_t>(j)];
      for (std::size_t i = 0; i < m; ++i) {
        double v = y[i];
        for (std::size_t k = 0; k < i; ++k) v -= lu[i * m + k] * y[k];
        y[i] = v;
      }
      for (std::size_t i = m; i-- > 0;) {
        double v = y[i];
        for (std::size_t k = i + 1; k < m; ++k) v -= lu[i * m + k] * y[k];
        y[i] = v / lu[i * m + i];
      }
      for (std::size_t i = 0; i < m; ++i) {
        double v = y[i];
        if (std::abs(v) < kDropTol) v = 0.0;
        data_[i * width_ + static_cast<std::size_t>(j)] = v;
      }
    };
    if (parallel) {
#pragma omp parallel num_threads(thread_count(threads))
      {
        std::vector<double> y(m);
#pragma omp for schedule(static)
        for (std::int64_t j = 0; j < width; ++j) solve_column(j, y);
      }
    } else {
      std::vector<double> y(m);
      for (std::int64_t j = 0; j < width; ++j) solve_column(j, y);
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < m; ++k) at(i, basis_[k]) = i == k ? 1.0 : 0.0;
      if (rhs(i) < 0.0 && rhs(i) > -kRhsClamp) rhs(i) = 0.0;
    }
    refresh_objective();
    return true;
  }

  // Maximizes with the objective row holding z_j - c_j. Columns with
  // allowed[j] == false never enter.
  Pass optimize(const std::vector<bool>& allowed, const SolveOptions& opts, long& pivots) {
    long since_refactor = 0;
    while (true) {
      if (since_refactor >= kRefactorInterval) {
        reinvert(opts.parallel, opts.threads);
        since_refactor = 0;
      }
      std::size_t enter = cols_;
      for (std::size_t j = 0; j < cols_; ++j)
        if (allowed[j] && objective_[j] < -opts.cost_tol) {
          enter = j;
          break;
        }
      if (enter == cols_) {
        // Confirm optimality on a freshly rebuilt tableau.
        if (since_refactor > 0 && reinvert(opts.parallel, opts.threads)) {
          since_refactor = 0;
          continue;
        }
        return Pass::Optimal;
      }

      // Harris two-pass ratio test: bound the step with a small relaxation,
      // then take the largest pivot among the rows that fit under it, so
      // round-off-sized entries never become pivots. Remaining ties go to
      // the smallest basic index (Bland).
      std::size_t leave = rows_;
      double bound = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < rows_; ++r) {
        const double a = at(r, enter);
        if (a > opts.pivot_tol) bound = std::min(bound, (std::max(rhs(r), 0.0) + kHarrisTol) / a);
      }
      double best_pivot = 0.0;
      for (std::size_t r = 0; r < rows_; ++r) {
        const double a = at(r, enter);
        if (a <= opts.pivot_tol || std::max(rhs(r), 0.0) / a > bound) continue;
        if (a > best_pivot || (a == best_pivot && basis_[r] < basis_[leave])) {
          best_pivot = a;
          leave = r;
        }
      }
      if (leave == rows_) return Pass::Unbounded;
      if (++pivots > opts.max_pivots) return Pass::PivotLimit;
      // Never step backwards on a round-off negative.
      if (rhs(leave) < 0.0) rhs(leave) = 0.0;
      pivot(leave, enter, opts.parallel, opts.threads);
      ++since_refactor;
    }
  }

 private:
  void refresh_objective() {
    for (std::size_t j = 0; j < cols_; ++j) objective_[j] = -cost_[j];
    objective_[cols_] = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      const double c = cost_[basis_[i]];
      if (c == 0.0) continue;
      for (std::size_t j = 0; j < width_; ++j) objective_[j] += c * at(i, j);
    }
    for (std::size_t i = 0; i < rows_; ++i) objective_[basis_[i]] = 0.0;
  }

  std::size_t rows_, cols_, width_;
  std::vector<double> data_;
  std::vector<double> original_;
  std::vector<double> objective_;
  std::vector<double> cost_;
  std::vector<std::size_t> basis_;
};

double row_violation(const Row& row, std::span<const double> x) {
  double lhs = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) lhs += row.coeffs[j] * x[j];
  switch (row.sense) {
    case Sense::Equal: return std::abs(lhs - row.rhs);
    case Sense::LessEqual: return std::max(0.0, lhs - row.rhs);
    case Sense::GreaterEqual: return std::max(0.0, row.rhs - lhs);
  }
  return 0.0;
}

}  // namespace

double max_violation(const LpProblem& problem, std::span<const double> x) {
  double worst = 0.0;
  for (double v : x) worst = std::max(worst, -v);
  for (const auto& r : problem.equalities) {
    Row eq = r;
    eq.sense = Sense::Equal;
    worst = std::max(worst, row_violation(eq, x));
  }
  for (const auto& r : problem.inequalities) worst = std::max(worst, row_violation(r, x));
  return worst;
}

LpSolution solve(const LpProblem& problem, SolveOptions opts) {
  const std::size_t n = problem.num_vars;
  LpSolution out;
  out.values.assign(n, 0.0);

  std::vector<Row> rows;
  rows.reserve(problem.equalities.size() + problem.inequalities.size());
  for (const auto& r : problem.equalities) {
    rows.push_back(r);
    rows.back().sense = Sense::Equal;
  }
  for (const auto& r : problem.inequalities) rows.push_back(r);
  for (const auto& r : rows) {
    if (r.coeffs.size() != n || !std::isfinite(r.rhs)) {
      out.status = Status::SolverFailure;
      out.note = "malformed row";
      return out;
    }
  }
  // Nonnegative right-hand sides.
  for (auto& r : rows) {
    if (r.rhs < 0.0) {
      for (double& c : r.coeffs) c = -c;
      r.rhs = -r.rhs;
      if (r.sense == Sense::LessEqual) r.sense = Sense::GreaterEqual;
      else if (r.sense == Sense::GreaterEqual) r.sense = Sense::LessEqual;
    }
  }

  const std::size_t m = rows.size();
  std::size_t slack_count = 0, art_count = 0;
  for (const auto& r : rows) {
    if (r.sense != Sense::Equal) ++slack_count;
    if (r.sense != Sense::LessEqual) ++art_count;
  }
  const std::size_t art_begin = n + slack_count;
  const std::size_t cols = art_begin + art_count;

  Tableau t(m, cols);
  std::vector<bool> is_artificial(cols, false);
  {
    std::size_t next_slack = n, next_art = art_begin;
    for (std::size_t i = 0; i < m; ++i) {
      const Row& r = rows[i];
      for (std::size_t j = 0; j < n; ++j) t.at(i, j) = r.coeffs[j];
      t.rhs(i) = r.rhs;
      if (r.sense == Sense::LessEqual) {
        t.at(i, next_slack) = 1.0;
        t.basis()[i] = next_slack++;
      } else {
        if (r.sense == Sense::GreaterEqual) t.at(i, next_slack++) = -1.0;
        t.at(i, next_art) = 1.0;
        is_artificial[next_art] = true;
        t.basis()[i] = next_art++;
      }
    }
  }

  t.freeze_original();

  // Phase 1: maximize -sum(artificials).
  {
    std::vector<double> cost(cols, 0.0);
    for (std::size_t j = art_begin; j < cols; ++j) cost[j] = -1.0;
    t.set_cost(std::move(cost));
  }
  const auto& obj = t.objective();
  std::vector<bool> allowed(cols, true);
  double rhs_scale = 1.0;
  for (const auto& r : rows) rhs_scale = std::max(rhs_scale, r.rhs);

  Pass pass = t.optimize(allowed, opts, out.pivots);
  if (pass == Pass::PivotLimit) {
    out.status = Status::SolverFailure;
    out.note = "pivot limit reached in phase 1";
    return out;
  }
  if (obj[cols] < -opts.feasibility_tol * rhs_scale) {
    out.status = Status::Infeasible;
    out.objective_value = obj[cols];
    return out;
  }

  // Drive zero-valued artificials out of the basis; rows where that is
  // impossible are redundant and stay inert.
  for (std::size_t i = 0; i < m; ++i) {
    if (!is_artificial[t.basis()[i]]) continue;
    std::size_t best = art_begin;
    double mag = opts.pivot_tol;
    for (std::size_t j = 0; j < art_begin; ++j)
      if (std::abs(t.at(i, j)) > mag) {
        mag = std::abs(t.at(i, j));
        best = j;
      }
    if (best == art_begin) continue;
    t.pivot(i, best, opts.parallel, opts.threads);
    ++out.pivots;
  }
  for (std::size_t j = art_begin; j < cols; ++j) allowed[j] = false;

  if (!problem.objective.empty()) {
    std::vector<double> cost(cols, 0.0);
    std::copy(problem.objective.begin(), problem.objective.end(), cost.begin());
    t.set_cost(std::move(cost));
    pass = t.optimize(allowed, opts, out.pivots);
    if (pass == Pass::PivotLimit) {
      out.status = Status::SolverFailure;
      out.note = "pivot limit reached in phase 2";
      return out;
    }
    if (pass == Pass::Unbounded) {
      out.status = Status::Unbounded;
      return out;
    }
  }

  t.reinvert(opts.parallel, opts.threads);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t b = t.basis()[i];
    if (b < n) out.values[b] = std::max(0.0, t.rhs(i));
  }
  out.objective_value = 0.0;
  for (std::size_t j = 0; j < problem.objective.size(); ++j)
    out.objective_value += problem.objective[j] * out.values[j];
  out.max_violation = max_violation(problem, out.values);
  if (out.max_violation > opts.feasibility_tol) {
    out.status = Status::SolverFailure;
    out.note = "certificate check failed";
    return out;
  }
  out.status = Status::Feasible;
  return out;
}

MarginSolution solve_with_margin(const LpProblem& problem, std::span<const std::size_t> strict_rows,
                                 double eps, double s_min, double s_max, SolveOptions opts) {
  LpProblem aug = problem;
  aug.objective.clear();
  // s = s_min + shifted, shifted in [0, s_max - s_min].
  const std::size_t s = aug.add_variable();
  for (std::size_t idx : strict_rows) {
    Row& r = aug.inequalities.at(idx);
    if (r.sense == Sense::GreaterEqual) {
      r.coeffs[s] = -1.0;
      r.rhs += s_min;
    } else if (r.sense == Sense::LessEqual) {
      r.coeffs[s] = 1.0;
      r.rhs -= s_min;
    }
  }
  Row cap;
  cap.coeffs.assign(aug.num_vars, 0.0);
  cap.coeffs[s] = 1.0;
  cap.rhs = s_max - s_min;
  cap.sense = Sense::LessEqual;
  aug.inequalities.push_back(cap);
  aug.objective.assign(aug.num_vars, 0.0);
  aug.objective[s] = 1.0;

  MarginSolution out;
  LpSolution sol = solve(aug, opts);
  out.lp.status = sol.status;
  out.lp.pivots = sol.pivots;
  out.lp.note = sol.note;
  out.lp.max_violation = sol.max_violation;
  if (sol.status != Status::Feasible) {
    out.margin = -std::numeric_limits<double>::infinity();
    return out;
  }
  out.margin = s_min + sol.values[s];
  out.lp.objective_value = out.margin;
  out.lp.values.assign(sol.values.begin(), sol.values.begin() + static_cast<std::ptrdiff_t>(problem.num_vars));
  out.strictly_feasible = out.margin > eps;
  return out;
}

void write_text(const LpProblem& problem, std::ostream& out) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "vars " << problem.num_vars << '\n';
  if (problem.objective.empty()) {
    out << "feasibility\n";
  } else {
    out << "max";
    for (double c : problem.objective) out << ' ' << num(c);
    out << '\n';
  }
  for (const auto& r : problem.equalities) {
    out << "eq";
    for (double c : r.coeffs) out << ' ' << num(c);
    out << " = " << num(r.rhs) << '\n';
  }
  for (const auto& r : problem.inequalities) {
    out << "ineq";
    for (double c : r.coeffs) out << ' ' << num(c);
    const char* s = r.sense == Sense::LessEqual ? "<=" : r.sense == Sense::GreaterEqual ? ">=" : "=";
    out << ' ' << s << ' ' << num(r.rhs) << '\n';
  }
}

}  // namespace wncs::lp
