#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wncs/capacity_idle.hpp"
#include "wncs/control.hpp"
#include "wncs/lp.hpp"
#include "wncs/model.hpp"

namespace wncs {

// States are pending-packet bitmasks: bit i set <=> sub-system i+1 still has
// an undelivered packet in its current period. Slots are 0-based internally;
// slot t of the (big) frame is t+1 in user-facing output.
using StateMask = std::uint32_t;

struct Transition {
  StateMask next = 0;
  double prob = 0.0;
};

struct MdpModel {
  int n = 0;
  int horizon = 0;  // slots per (big) frame
  std::vector<double> success;
  std::vector<int> periods;  // sub-system i re-arms at every slot t with t % periods[i] == 0

  std::size_t num_states() const { return std::size_t{1} << n; }
  StateMask full_state() const { return static_cast<StateMask>(num_states() - 1); }
  bool resets_at(int flow, int slot) const { return slot % periods[flow] == 0; }
  // r_i(s, a) = p_i 1{s_i = 1 and a = i}; flow and action 0-based.
  double reward(int flow, StateMask s, int action) const;
  // Outcomes of taking `action` in `s` during slot t, including the re-arming
  // applied on entry to the next slot (wrapping to slot 0 after the last).
  // Returns the number of outcomes written (1 or 2).
  int transitions(int slot, StateMask s, int action, std::array<Transition, 2>& out) const;
  std::size_t variable_index(int slot, StateMask s, int action) const {
    return (static_cast<std::size_t>(slot) * num_states() + s) * static_cast<std::size_t>(n) +
           static_cast<std::size_t>(action);
  }
  std::size_t num_variables() const {
    return static_cast<std::size_t>(horizon) * num_states() * static_cast<std::size_t>(n);
  }
};

struct MdpLimits {
  int max_flows = 10;
  int max_horizon = 720;
  std::size_t max_variables = 60000;
};

// Horizon = lcm of the sampling periods.
MdpModel build_mdp(const SystemConfig& config, MdpLimits limits = {});

// A per-period delivery requirement: sub-system `flow` (0-based), period
// `index` (0-based) spanning slots [first_slot, last_slot].
struct ThroughputWindow {
  int flow = 0;
  int index = 0;
  int first_slot = 0;
  int last_slot = 0;
  double target = 0.0;
};

struct CapacityLp {
  lp::LpProblem problem;
  std::vector<ThroughputWindow> windows;  // windows[k] <-> problem.inequalities[k]
};

// Occupancy-measure program over x_t(s, a): flow balance with wrap-around,
// per-slot normalization, and sum_t sum_{s,a} x r_i >= R_i over the whole frame.
CapacityLp build_capacity_lp(const MdpModel& mdp, std::span<const double> targets);

struct HeterogeneousPlan {
  std::vector<int> periods;
  int big_frame = 0;
  std::vector<int> repetitions;            // n_i = H / h_i
  std::vector<std::vector<double>> delivery;  // delta_j^i, filled after synthesis
  std::vector<std::vector<double>> dropout;   // q_j^i = 1 - delta_j^i

  std::size_t window_count() const;
};

HeterogeneousPlan make_plan(const SystemConfig& config);

// Big-frame program with one throughput row per period window; row targets
// are 1 - q_max^i(a_i, h_i) and are meant to be made strict through
// lp::solve_with_margin.
CapacityLp build_heterogeneous_lp(const SystemConfig& config, const HeterogeneousPlan& plan,
                                  MdpLimits limits = {});

struct Membership {
  bool feasible = false;  // R is in the (closed) capacity region
  double slack = 0.0;     // largest s with R + s 1 still achievable, clipped to [-1, 1]
  lp::Status status = lp::Status::SolverFailure;
};

Membership region_membership(const SystemConfig& config, std::span<const double> targets,
                             lp::SolveOptions opts = {});

struct OccupancyMeasure {
  std::vector<double> x;  // indexed by MdpModel::variable_index
};

// Cyclo-stationary randomized policy: P(A_t = a | S_t = s), repeated every horizon slots.
struct SchedulingPolicy {
  int n = 0;
  int horizon = 0;
  std::vector<double> probs;  // [(t * states + s) * n + a]

  std::size_t num_states() const { return std::size_t{1} << n; }
  double prob(int slot, StateMask s, int action) const {
    return probs[(static_cast<std::size_t>(slot % horizon) * num_states() + s) * n + action];
  }
  std::span<const double> conditional(int slot, StateMask s) const {
    return {probs.data() + (static_cast<std::size_t>(slot % horizon) * num_states() + s) * n,
            static_cast<std::size_t>(n)};
  }
};

// Normalizes x_t(s, .) per (t, s); states without occupancy mass fall back to
// uniform over pending flows, or flow 1 when nothing is pending.
SchedulingPolicy extract_policy(const MdpModel& mdp, const OccupancyMeasure& occupancy);

// Deterministic policy serving `action` (0-based) in every slot and state.
SchedulingPolicy constant_policy(const MdpModel& mdp, int action);

struct PolicyPerformance {
  std::vector<double> marginals;  // [t * states + s], starting from the full state at slot 0
  std::vector<std::vector<double>> window_delivery;  // [flow][period within the big frame]
};

// Exact state marginals and per-period delivery probabilities of a policy run
// through the MDP kernels.
PolicyPerformance forward_propagate(const MdpModel& mdp, const SchedulingPolicy& policy);

struct SubsystemDesign {
  DiscretePlant plant;
  DareSolution dare;
  ControllerState controller;  // initial state, u_0 = 0
  double q_max = 0.0;
  double design_q = 0.0;
  double target = 0.0;  // required per-period delivery probability
  int period = 1;
};

struct CoDesign {
  MdpModel mdp;
  SchedulingPolicy policy;
  std::vector<SubsystemDesign> subsystems;
  PolicyPerformance performance;
  bool heterogeneous = false;
  std::optional<HeterogeneousPlan> plan;
  double lp_margin = 0.0;
};

enum class SynthesisOutcome { Synthesized, NotStabilizable, SufficientConditionNotMet };
const char* to_string(SynthesisOutcome o);

struct SynthesisResult {
  SynthesisOutcome outcome = SynthesisOutcome::NotStabilizable;
  StabilityVerdict verdict;
  std::optional<CoDesign> design;
};

SynthesisResult synthesize(const SystemConfig& config, MdpLimits limits = {},
                           lp::SolveOptions lp_opts = {});

// {"<t>": {"<state bits>": {"<action>": "<prob>"}}}, t and actions 1-based,
// state bits written flow 1 first, probabilities to 12 significant digits.
std::string policy_to_json(const SchedulingPolicy& policy);
std::string state_bits(StateMask s, int n);

}  // namespace wncs
