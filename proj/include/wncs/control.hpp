#pragma once

#include "wncs/model.hpp"

namespace wncs {

// Largest i.i.d. dropout rate a plant tolerates:
//   q_max = 1 / (e^{4 a h delta} - e^{2 a h delta} + 1).
double max_dropout_rate(double a, int h, double delta);
// Same quantity from the lifted growth a_bar = e^{a h delta}.
double max_dropout_rate(const DiscretePlant& plant);

struct DareSolution {
  double p_val = 0.0;
  double upsilon = 1.0;
  double m_val = 0.0;
  double q = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool used_bisection = false;

  // K = M / Upsilon.
  double gain() const { return m_val / upsilon; }
};

struct DareOptions {
  double tol = 1e-12;
  int max_iterations = 100000;
};

// Right-hand side of the scalar delay-dependent Riccati equation. Written with
// only positive terms so that it carries no cancellation.
double dare_map(const DiscretePlant& plant, double q, double p);

// Unique positive fixed point P = dare_map(P). Requires 0 <= q < q_max.
DareSolution solve_dare(const DiscretePlant& plant, double q, DareOptions opts = {});

struct ControllerState {
  double gain = 0.0;
  double q = 0.0;
  double u_prev = 0.0;
  double x_hat = 0.0;  // predicted state for the next frame
};

ControllerState make_controller(const DareSolution& dare);

struct ControlStep {
  double u = 0.0;
  ControllerState next;
};

// u_k = -K (a_bar x_k + (1-q) b_bar u_{k-1}).
ControlStep control_input(const ControllerState& ctrl, const DiscretePlant& plant, double x_k);

}  // namespace wncs
