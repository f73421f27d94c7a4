#include "wncs/control.hpp"

#include <cmath>
#include <string>

namespace wncs {

namespace {

// q_max as a function of y = a_bar^{-2}; y^2 / (1 - y + y^2) stays finite for
// huge a h delta where the direct form overflows.
double q_max_from_inverse_square(double y) { return y * y / (1.0 - y + y * y); }

struct DareTerms {
  double upsilon;
  double m;
};

DareTerms terms(const DiscretePlant& plant, double q, double p) {
  const double a = plant.a_bar, b = plant.b_bar, r = 1.0 - q;
  const double upsilon = r * r * b * b * p + q * r * b * b * a * a * p + q * r * b * b + 1.0;
  return {upsilon, r * b * p * a};
}

}  // namespace

double max_dropout_rate(double a, int h, double delta) {
  if (a == 0.0) return 1.0;
  return q_max_from_inverse_square(std::exp(-2.0 * a * static_cast<double>(h) * delta));
}

double max_dropout_rate(const DiscretePlant& plant) {
  if (plant.a_bar == 1.0) return 1.0;
  return q_max_from_inverse_square(1.0 / (plant.a_bar * plant.a_bar));
}

double dare_map(const DiscretePlant& plant, double q, double p) {
  // A^2 P + 1 - M^2 / Upsilon
  //   = 1 + A^2 P (q r A^2 B^2 P + q r B^2 + 1) / Upsilon,   r = 1 - q.
  const double a2 = plant.a_bar * plant.a_bar, b2 = plant.b_bar * plant.b_bar, r = 1.0 - q;
  const double d = q * r * b2 + 1.0;
  const double upsilon = r * b2 * (r + q * a2) * p + d;
  return 1.0 + a2 * p * (q * r * a2 * b2 * p + d) / upsilon;
}

DareSolution solve_dare(const DiscretePlant& plant, double q, DareOptions opts) {
  const double q_max = max_dropout_rate(plant);
  if (!(q >= 0.0) || !(q < q_max))
    throw Error(ErrorKind::NoStabilizingSolution,
                "dropout rate " + std::to_string(q) + " is not below q_max " +
                    std::to_string(q_max));

  DareSolution sol;
  sol.q = q;
  double p = 1.0;
  bool converged = false;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const double next = dare_map(plant, q, p);
    sol.iterations = it;
    if (!std::isfinite(next)) break;
    const bool done = next == p || std::abs(next - p) <= opts.tol;
    p = next;
    if (done) {
      converged = true;
      break;
    }
  }

  if (!converged) {
    // Bracketing fallback on g(P) = dare_map(P) - P. g(1) > 0 and g < 0 past
    // the fixed point whenever q < q_max.
    sol.used_bisection = true;
    auto g = [&](double x) { return dare_map(plant, q, x) - x; };
    double lo = 1.0, hi = 2.0;
    int doublings = 0;
    while (g(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (++doublings > 2000 || !std::isfinite(hi))
        throw Error(ErrorKind::NumericFailure, "DARE bracket search diverged");
    }
    for (int it = 0; it < 4000; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (g(mid) > 0.0 ? lo : hi) = mid;
    }
    p = std::abs(g(lo)) < std::abs(g(hi)) ? lo : hi;
  }

  const DareTerms t = terms(plant, q, p);
  sol.p_val = p;
  sol.upsilon = t.upsilon;
  sol.m_val = t.m;
  sol.residual = std::abs(p - dare_map(plant, q, p));
  if (!(p > 0.0) || !std::isfinite(p))
    throw Error(ErrorKind::NumericFailure, "DARE solver produced a non-positive solution");
  return sol;
}

ControllerState make_controller(const DareSolution& dare) {
  ControllerState c;
  c.gain = dare.gain();
  c.q = dare.q;
  return c;
}

ControlStep control_input(const ControllerState& ctrl, const DiscretePlant& plant, double x_k) {
  ControlStep step;
  step.next = ctrl;
  step.next.x_hat = plant.a_bar * x_k + (1.0 - ctrl.q) * plant.b_bar * ctrl.u_prev;
  step.u = -ctrl.gain * step.next.x_hat;
  step.next.u_prev = step.u;
  return step;
}

}  // namespace wncs
