#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace wncs::lp {

enum class Sense { LessEqual, GreaterEqual, Equal };

struct Row {
  std::vector<double> coeffs;  // length == LpProblem::num_vars
  double rhs = 0.0;
  Sense sense = Sense::Equal;
};

// All variables are implicitly >= 0.
struct LpProblem {
  std::size_t num_vars = 0;
  std::vector<Row> equalities;
  std::vector<Row> inequalities;
  std::vector<double> objective;  // maximize; empty for a pure feasibility problem

  std::size_t add_variable();  // appends a zero column to every row
};

enum class Status { Feasible, Infeasible, Unbounded, SolverFailure };
const char* to_string(Status s);

struct LpSolution {
  std::vector<double> values;
  Status status = Status::SolverFailure;
  double objective_value = 0.0;
  double max_violation = 0.0;
  long pivots = 0;
  std::string note;
};

struct SolveOptions {
  double feasibility_tol = 1e-9;
  double pivot_tol = 1e-9;  // smaller pivots let round-off blow up the tableau
  double cost_tol = 1e-9;
  long max_pivots = 2'000'000;
  bool parallel = true;  // OpenMP row elimination; same bits as the serial path
  int threads = 0;
};

// Two-phase primal simplex on a dense tableau, Bland's rule for both the
// entering column and ratio-test ties. Feasible results are re-verified
// against the raw rows; a failed check is reported as SolverFailure.
LpSolution solve(const LpProblem& problem, SolveOptions opts = {});

// Largest violation of any row or nonnegativity bound at x.
double max_violation(const LpProblem& problem, std::span<const double> x);

struct MarginSolution {
  LpSolution lp;            // values restricted to the original variables
  double margin = 0.0;      // optimal common slack s
  bool strictly_feasible = false;  // margin > eps
};

// Adds one scalar s in [s_min, s_max] to the designated inequality rows
// (a x >= b becomes a x - s >= b, a x <= b becomes a x + s <= b) and
// maximizes it. Any objective on the input is ignored.
MarginSolution solve_with_margin(const LpProblem& problem, std::span<const std::size_t> strict_rows,
                                 double eps, double s_min = 0.0, double s_max = 1.0,
                                 SolveOptions opts = {});

// Plain-text dump, one row per line:
//   vars <n>
//   max <c_1> ... <c_n>          (or "feasibility")
//   eq <a_1> ... <a_n> = <b>
//   ineq <a_1> ... <a_n> <=|>=|= <b>
void write_text(const LpProblem& problem, std::ostream& out);

}  // namespace wncs::lp
