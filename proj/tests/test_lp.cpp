#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <vector>

#include "wncs/lp.hpp"

using namespace wncs::lp;

namespace {

Row row(std::vector<double> a, Sense s, double b) { return Row{std::move(a), b, s}; }

// Brute-force vertex enumeration for tiny problems: every choice of n tight
// constraints (rows or bounds) is solved exactly and kept if feasible.
struct Vertex {
  bool found = false;
  double best = -INFINITY;
};

bool solve_square(std::vector<std::vector<double>> m, std::vector<double> rhs, std::vector<double>& x) {
  const std::size_t n = rhs.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    if (std::abs(m[piv][c]) < 1e-12) return false;
    std::swap(m[piv], m[c]);
    std::swap(rhs[piv], rhs[c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
      rhs[r] -= f * rhs[c];
    }
  }
  x.resize(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = rhs[i] / m[i][i];
  return true;
}

Vertex enumerate_vertices(const LpProblem& p) {
  const std::size_t n = p.num_vars;
  std::vector<std::vector<double>> faces;
  std::vector<double> rhs;
  for (const auto& r : p.equalities) faces.push_back(r.coeffs), rhs.push_back(r.rhs);
  for (const auto& r : p.inequalities) faces.push_back(r.coeffs), rhs.push_back(r.rhs);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    faces.push_back(e);
    rhs.push_back(0.0);
  }
  Vertex v;
  const std::size_t f = faces.size();
  std::vector<std::size_t> pick(n);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t depth, std::size_t start) {
    if (depth == n) {
      std::vector<std::vector<double>> m;
      std::vector<double> b;
      for (auto k : pick) m.push_back(faces[k]), b.push_back(rhs[k]);
      std::vector<double> x;
      if (!solve_square(m, b, x)) return;
      if (max_violation(p, x) > 1e-9) return;
      double obj = 0.0;
      for (std::size_t j = 0; j < n; ++j) obj += p.objective[j] * x[j];
      v.found = true;
      v.best = std::max(v.best, obj);
      return;
    }
    for (std::size_t k = start; k < f; ++k) {
      pick[depth] = k;
      rec(depth + 1, k + 1);
    }
  };
  rec(0, 0);
  return v;
}

LpProblem random_problem(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::uniform_real_distribution<double> coef(0.0, 1.0), sign(-1.0, 1.0);
  LpProblem p;
  p.num_vars = n;
  // A covering row keeps the problem bounded.
  p.inequalities.push_back(row(std::vector<double>(n, 1.0), Sense::LessEqual, 1.0 + 3.0 * coef(rng)));
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> a(n);
    for (auto& v : a) v = sign(rng);
    const double b = coef(rng);
    const double kind = coef(rng);
    p.inequalities.push_back(row(a, kind < 0.6 ? Sense::LessEqual : Sense::GreaterEqual, kind < 0.6 ? b : 0.5 * b));
  }
  p.objective.resize(n);
  for (auto& c : p.objective) c = sign(rng);
  return p;
}

}  // namespace

TEST_CASE("maximizes a single bounded variable") {
  LpProblem p;
  p.num_vars = 1;
  p.inequalities.push_back(row({1.0}, Sense::LessEqual, 1.0));
  p.objective = {1.0};
  const auto s = solve(p);
  REQUIRE(s.status == Status::Feasible);
  CHECK(s.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.objective_value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("equality constrained optimum sits on a vertex") {
  LpProblem p;
  p.num_vars = 2;
  p.equalities.push_back(row({1.0, 1.0}, Sense::Equal, 1.0));
  p.objective = {1.0, 0.0};
  const auto s = solve(p);
  REQUIRE(s.status == Status::Feasible);
  CHECK(s.values[0] == doctest::Approx(1.0));
  CHECK(std::abs(s.values[1]) < 1e-12);
  CHECK(s.max_violation <= 1e-9);
}

TEST_CASE("infeasible system is reported as infeasible") {
  LpProblem p;
  p.num_vars = 2;
  p.inequalities.push_back(row({1.0, 1.0}, Sense::LessEqual, 0.5));
  p.inequalities.push_back(row({1.0, 0.0}, Sense::GreaterEqual, 0.4));
  p.inequalities.push_back(row({0.0, 1.0}, Sense::GreaterEqual, 0.3));
  CHECK(solve(p).status == Status::Infeasible);
  CHECK(solve(p, {.parallel = false}).status == Status::Infeasible);
}

TEST_CASE("unbounded objective is detected") {
  LpProblem p;
  p.num_vars = 2;
  p.inequalities.push_back(row({1.0, -1.0}, Sense::LessEqual, 1.0));
  p.objective = {1.0, 1.0};
  CHECK(solve(p).status == Status::Unbounded);
}

TEST_CASE("feasibility problems return a verified point") {
  LpProblem p;
  p.num_vars = 3;
  p.equalities.push_back(row({1.0, 1.0, 1.0}, Sense::Equal, 1.0));
  p.inequalities.push_back(row({1.0, 0.0, 0.0}, Sense::GreaterEqual, 0.2));
  p.inequalities.push_back(row({0.0, 1.0, 0.0}, Sense::GreaterEqual, 0.3));
  const auto s = solve(p);
  REQUIRE(s.status == Status::Feasible);
  CHECK(max_violation(p, s.values) <= 1e-9);
}

TEST_CASE("redundant and duplicated equalities do not break phase one") {
  LpProblem p;
  p.num_vars = 3;
  p.equalities.push_back(row({1.0, 1.0, 0.0}, Sense::Equal, 1.0));
  p.equalities.push_back(row({1.0, 1.0, 0.0}, Sense::Equal, 1.0));
  p.equalities.push_back(row({2.0, 2.0, 0.0}, Sense::Equal, 2.0));
  p.equalities.push_back(row({0.0, 0.0, 1.0}, Sense::Equal, 0.5));
  p.objective = {0.0, 1.0, 1.0};
  const auto s = solve(p);
  REQUIRE(s.status == Status::Feasible);
  CHECK(s.objective_value == doctest::Approx(1.5));
}

TEST_CASE("negative right-hand sides are normalized") {
  LpProblem p;
  p.num_vars = 2;
  p.inequalities.push_back(row({-1.0, -1.0}, Sense::LessEqual, -1.0));  // x + y >= 1
  p.inequalities.push_back(row({1.0, 0.0}, Sense::LessEqual, 0.25));
  p.objective = {0.0, -1.0};
  const auto s = solve(p);
  REQUIRE(s.status == Status::Feasible);
  CHECK(s.values[1] == doctest::Approx(0.75));
}

TEST_CASE("add_variable widens every row") {
  LpProblem p;
  p.num_vars = 1;
  p.equalities.push_back(row({1.0}, Sense::Equal, 1.0));
  p.inequalities.push_back(row({1.0}, Sense::LessEqual, 2.0));
  p.objective = {1.0};
  CHECK(p.add_variable() == 1);
  CHECK(p.num_vars == 2);
  CHECK(p.equalities[0].coeffs.size() == 2);
  CHECK(p.inequalities[0].coeffs.size() == 2);
  CHECK(p.objective.size() == 2);
}

TEST_CASE("simplex matches brute-force vertex enumeration") {
  std::mt19937_64 rng(20240611);
  int infeasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 3;
    const auto p = random_problem(rng, n, 2 + trial % 4);
    const auto oracle = enumerate_vertices(p);
    const auto s = solve(p);
    CAPTURE(trial);
    if (!oracle.found) {
      CHECK(s.status == Status::Infeasible);
      ++infeasible;
      continue;
    }
    REQUIRE(s.status == Status::Feasible);
    CHECK(s.objective_value == doctest::Approx(oracle.best).epsilon(1e-9).scale(1.0));
    CHECK(max_violation(p, s.values) <= 1e-9);
  }
  CHECK(infeasible > 0);
}

TEST_CASE("parallel pivoting is bitwise equal to the serial path and deterministic") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_problem(rng, 40, 60);
    const auto a = solve(p, {.parallel = false});
    const auto b = solve(p, {.parallel = true, .threads = 4});
    const auto c = solve(p, {.parallel = true, .threads = 4});
    CHECK(a.status == b.status);
    CHECK(a.pivots == b.pivots);
    CHECK(a.values == b.values);
    CHECK(b.values == c.values);
  }
}

TEST_CASE("margin mode maximizes the common slack") {
  // x >= 0.2, y >= 0.3, x + y <= 1: both rows strict, best common slack 0.25
  LpProblem p;
  p.num_vars = 2;
  p.inequalities.push_back(row({1.0, 0.0}, Sense::GreaterEqual, 0.2));
  p.inequalities.push_back(row({0.0, 1.0}, Sense::GreaterEqual, 0.3));
  p.equalities.push_back(row({1.0, 1.0}, Sense::Equal, 1.0));
  const std::vector<std::size_t> strict = {0, 1};
  const auto m = solve_with_margin(p, strict, 1e-6);
  REQUIRE(m.lp.status == Status::Feasible);
  CHECK(m.margin == doctest::Approx(0.25));
  CHECK(m.strictly_feasible);
  CHECK(m.lp.values.size() == 2);
  CHECK(max_violation(p, m.lp.values) <= 1e-9);

  // Touching targets: the closed system is feasible, the strict one is not.
  LpProblem t = p;
  t.inequalities[0].rhs = 0.5;
  t.inequalities[1].rhs = 0.5;
  const auto z = solve_with_margin(t, strict, 1e-6);
  CHECK(z.lp.status == Status::Feasible);
  CHECK(std::abs(z.margin) < 1e-12);
  CHECK_FALSE(z.strictly_feasible);

  // Negative slack only when allowed.
  t.inequalities[0].rhs = 0.7;
  CHECK(solve_with_margin(t, strict, 1e-6).lp.status == Status::Infeasible);
  const auto neg = solve_with_margin(t, strict, 1e-6, -1.0, 1.0);
  REQUIRE(neg.lp.status == Status::Feasible);
  CHECK(neg.margin == doctest::Approx(-0.1));
}

TEST_CASE("text dump format") {
  LpProblem p;
  p.num_vars = 2;
  p.equalities.push_back(row({1.0, 1.0}, Sense::Equal, 1.0));
  p.inequalities.push_back(row({1.0, 0.0}, Sense::LessEqual, 0.5));
  p.inequalities.push_back(row({0.0, 2.0}, Sense::GreaterEqual, 0.25));
  std::ostringstream feas;
  write_text(p, feas);
  CHECK(feas.str() == "vars 2\nfeasibility\neq 1 1 = 1\nineq 1 0 <= 0.5\nineq 0 2 >= 0.25\n");
  p.objective = {1.0, -1.0};
  std::ostringstream obj;
  write_text(p, obj);
  CHECK(obj.str().rfind("vars 2\nmax 1 -1\n", 0) == 0);
}
