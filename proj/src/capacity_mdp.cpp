#include "wncs/capacity_mdp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

namespace wncs {

double MdpModel::reward(int flow, StateMask s, int action) const {
  return (action == flow && ((s >> flow) & 1u)) ? success[flow] : 0.0;
}

int MdpModel::transitions(int slot, StateMask s, int action, std::array<Transition, 2>& out) const {
  const int next_slot = (slot + 1) % horizon;
  StateMask rearm = 0;
  for (int i = 0; i < n; ++i)
    if (resets_at(i, next_slot)) rearm |= StateMask{1} << i;

  const StateMask bit = StateMask{1} << action;
  if (!(s & bit)) {
    out[0] = {s | rearm, 1.0};
    return 1;
  }
  const double p = success[action];
  if (p >= 1.0) {
    out[0] = {(s & ~bit) | rearm, 1.0};
    return 1;
  }
  out[0] = {(s & ~bit) | rearm, p};
  out[1] = {s | rearm, 1.0 - p};
  return 2;
}

MdpModel build_mdp(const SystemConfig& config, MdpLimits limits) {
  const SystemConfig cfg = validate(config);
  MdpModel m;
  m.n = static_cast<int>(cfg.size());
  if (m.n > limits.max_flows)
    throw Error(ErrorKind::TooLarge, "2^" + std::to_string(m.n) + " states exceed the MDP state cap of 2^" +
                                         std::to_string(limits.max_flows));
  long long horizon = 1;
  for (int h : cfg.sampling_periods) {
    horizon = std::lcm(horizon, static_cast<long long>(h));
    if (horizon > limits.max_horizon)
      throw Error(ErrorKind::TooLarge, "big frame exceeds the horizon cap of " +
                                           std::to_string(limits.max_horizon) + " slots");
  }
  m.horizon = static_cast<int>(horizon);
  m.success = cfg.channel;
  m.periods = cfg.sampling_periods;
  if (m.num_variables() > limits.max_variables)
    throw Error(ErrorKind::TooLarge, "occupancy program would need " + std::to_string(m.num_variables()) +
                                         " variables (cap " + std::to_string(limits.max_variables) + ")");
  return m;
}

namespace {

// Flow balance (wrap-around included) and per-slot normalization.
lp::LpProblem occupancy_skeleton(const MdpModel& mdp) {
  lp::LpProblem prob;
  prob.num_vars = mdp.num_variables();
  const std::size_t states = mdp.num_states();
  const int h = mdp.horizon;

  for (int t = 0; t < h; ++t) {
    const int next = (t + 1) % h;
    std::vector<lp::Row> rows(states);
    for (auto& r : rows) {
      r.coeffs.assign(prob.num_vars, 0.0);
      r.sense = lp::Sense::Equal;
    }
    for (StateMask s2 = 0; s2 < states; ++s2)
      for (int a = 0; a < mdp.n; ++a) rows[s2].coeffs[mdp.variable_index(next, s2, a)] += 1.0;
    std::array<Transition, 2> out{};
    for (StateMask s = 0; s < states; ++s)
      for (int a = 0; a < mdp.n; ++a) {
        const int k = mdp.transitions(t, s, a, out);
        for (int o = 0; o < k; ++o) rows[out[o].next].coeffs[mdp.variable_index(t, s, a)] -= out[o].prob;
      }
    // Summed over next states the balance rows give N_{t+1} = N_t, which the
    // normalization rows already state; the empty-state row is dropped so the
    // equality system has full row rank.
    for (StateMask s2 = 1; s2 < states; ++s2) prob.equalities.push_back(std::move(rows[s2]));
  }
  for (int t = 0; t < h; ++t) {
    lp::Row r;
    r.coeffs.assign(prob.num_vars, 0.0);
    r.rhs = 1.0;
    for (StateMask s = 0; s < states; ++s)
      for (int a = 0; a < mdp.n; ++a) r.coeffs[mdp.variable_index(t, s, a)] = 1.0;
    prob.equalities.push_back(std::move(r));
  }
  return prob;
}

lp::Row window_row(const MdpModel& mdp, const ThroughputWindow& w) {
  lp::Row r;
  r.coeffs.assign(mdp.num_variables(), 0.0);
  r.sense = lp::Sense::GreaterEqual;
  r.rhs = w.target;
  for (int t = w.first_slot; t <= w.last_slot; ++t)
    for (StateMask s = 0; s < mdp.num_states(); ++s)
      r.coeffs[mdp.variable_index(t, s, w.flow)] = mdp.reward(w.flow, s, w.flow);
  return r;
}

std::vector<ThroughputWindow> period_windows(const MdpModel& mdp) {
  std::vector<ThroughputWindow> out;
  for (int i = 0; i < mdp.n; ++i) {
    const int h = mdp.periods[i];
    for (int j = 0; j * h < mdp.horizon; ++j) out.push_back({i, j, j * h, (j + 1) * h - 1, 0.0});
  }
  return out;
}

}  // namespace

CapacityLp build_capacity_lp(const MdpModel& mdp, std::span<const double> targets) {
  CapacityLp out;
  out.problem = occupancy_skeleton(mdp);
  for (int i = 0; i < mdp.n; ++i) {
    ThroughputWindow w{i, 0, 0, mdp.horizon - 1, targets[i]};
    out.problem.inequalities.push_back(window_row(mdp, w));
    out.windows.push_back(w);
  }
  return out;
}

std::size_t HeterogeneousPlan::window_count() const {
  return static_cast<std::size_t>(std::accumulate(repetitions.begin(), repetitions.end(), 0));
}

HeterogeneousPlan make_plan(const SystemConfig& config) {
  HeterogeneousPlan plan;
  plan.periods = config.sampling_periods;
  long long big = 1;
  for (int h : plan.periods) big = std::lcm(big, static_cast<long long>(h));
  plan.big_frame = static_cast<int>(big);
  for (int h : plan.periods) plan.repetitions.push_back(plan.big_frame / h);
  return plan;
}

CapacityLp build_heterogeneous_lp(const SystemConfig& config, const HeterogeneousPlan& plan,
                                  MdpLimits limits) {
  const MdpModel mdp = build_mdp(config, limits);
  if (mdp.horizon != plan.big_frame)
    throw Error(ErrorKind::InvalidConfig, "plan big frame does not match the configuration");
  CapacityLp out;
  out.problem = occupancy_skeleton(mdp);
  for (ThroughputWindow w : period_windows(mdp)) {
    w.target = 1.0 - max_dropout_rate(config.plants[w.flow].a, config.sampling_periods[w.flow],
                                      config.slot_length);
    out.problem.inequalities.push_back(window_row(mdp, w));
    out.windows.push_back(w);
  }
  return out;
}

Membership region_membership(const SystemConfig& config, std::span<const double> targets,
                             lp::SolveOptions opts) {
  const MdpModel mdp = build_mdp(config);
  const CapacityLp clp = build_capacity_lp(mdp, targets);
  std::vector<std::size_t> rows(clp.windows.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto res = lp::solve_with_margin(clp.problem, rows, 0.0, -1.0, 1.0, opts);
  if (res.lp.status == lp::Status::SolverFailure)
    throw Error(ErrorKind::SolverFailure, "capacity LP: " + res.lp.note);
  Membership m;
  m.status = res.lp.status;
  m.slack = res.margin;
  m.feasible = res.lp.status == lp::Status::Feasible && res.margin >= 0.0;
  return m;
}

SchedulingPolicy extract_policy(const MdpModel& mdp, const OccupancyMeasure& occupancy) {
  SchedulingPolicy pol;
  pol.n = mdp.n;
  pol.horizon = mdp.horizon;
  pol.probs.assign(mdp.num_variables(), 0.0);
  for (int t = 0; t < mdp.horizon; ++t)
    for (StateMask s = 0; s < mdp.num_states(); ++s) {
      const std::size_t base = mdp.variable_index(t, s, 0);
      double mass = 0.0;
      for (int a = 0; a < mdp.n; ++a) mass += occupancy.x[base + a];
      if (mass > 0.0) {
        for (int a = 0; a < mdp.n; ++a) pol.probs[base + a] = occupancy.x[base + a] / mass;
        continue;
      }
      const int pending = std::popcount(s);
      if (pending == 0) {
        pol.probs[base] = 1.0;
      } else {
        for (int a = 0; a < mdp.n; ++a)
          if ((s >> a) & 1u) pol.probs[base + a] = 1.0 / pending;
      }
    }
  return pol;
}

SchedulingPolicy constant_policy(const MdpModel& mdp, int action) {
  SchedulingPolicy pol;
  pol.n = mdp.n;
  pol.horizon = mdp.horizon;
  pol.probs.assign(mdp.num_variables(), 0.0);
  for (int t = 0; t < mdp.horizon; ++t)
    for (StateMask s = 0; s < mdp.num_states(); ++s) pol.probs[mdp.variable_index(t, s, action)] = 1.0;
  return pol;
}

PolicyPerformance forward_propagate(const MdpModel& mdp, const SchedulingPolicy& policy) {
  const std::size_t states = mdp.num_states();
  PolicyPerformance perf;
  perf.marginals.assign(static_cast<std::size_t>(mdp.horizon) * states, 0.0);
  perf.window_delivery.resize(mdp.n);
  for (int i = 0; i < mdp.n; ++i) perf.window_delivery[i].assign(mdp.horizon / mdp.periods[i], 0.0);

  std::vector<double> mu(states, 0.0), next(states, 0.0);
  mu[mdp.full_state()] = 1.0;
  std::array<Transition, 2> out{};
  for (int t = 0; t < mdp.horizon; ++t) {
    std::copy(mu.begin(), mu.end(), perf.marginals.begin() + static_cast<std::ptrdiff_t>(t * states));
    std::fill(next.begin(), next.end(), 0.0);
    for (StateMask s = 0; s < states; ++s) {
      if (mu[s] == 0.0) continue;
      for (int a = 0; a < mdp.n; ++a) {
        const double w = mu[s] * policy.prob(t, s, a);
        if (w == 0.0) continue;
        perf.window_delivery[a][t / mdp.periods[a]] += w * mdp.reward(a, s, a);
        const int k = mdp.transitions(t, s, a, out);
        for (int o = 0; o < k; ++o) next[out[o].next] += w * out[o].prob;
      }
    }
    mu.swap(next);
  }
  return perf;
}

const char* to_string(SynthesisOutcome o) {
  switch (o) {
    case SynthesisOutcome::Synthesized: return "synthesized";
    case SynthesisOutcome::NotStabilizable: return "not-stabilizable";
    case SynthesisOutcome::SufficientConditionNotMet: return "sufficient condition not met";
  }
  return "unknown";
}

namespace {

SubsystemDesign design_controller(const SystemConfig& cfg, int i, double design_q, double target) {
  SubsystemDesign d;
  d.period = cfg.sampling_periods[i];
  d.plant = discretize(cfg.plants[i], d.period, cfg.slot_length);
  d.q_max = max_dropout_rate(cfg.plants[i].a, d.period, cfg.slot_length);
  d.design_q = std::max(0.0, design_q);
  d.target = target;
  d.dare = solve_dare(d.plant, d.design_q);
  d.controller = make_controller(d.dare);
  return d;
}

SynthesisResult synthesize_homogeneous(const SystemConfig& cfg, MdpLimits limits,
                                       lp::SolveOptions lp_opts) {
  SynthesisResult res;
  res.verdict = check_stability_general(cfg);
  if (!res.verdict.stabilizable) {
    res.outcome = SynthesisOutcome::NotStabilizable;
    return res;
  }
  const int h = cfg.period();
  const double eps = cfg.feasibility_margin;
  std::vector<double> targets = stability_targets(cfg, h);
  for (double& r : targets) r += eps;

  CoDesign design;
  design.mdp = build_mdp(cfg, limits);
  const CapacityLp clp = build_capacity_lp(design.mdp, targets);
  const lp::LpSolution sol = lp::solve(clp.problem, lp_opts);
  if (sol.status == lp::Status::SolverFailure)
    throw Error(ErrorKind::SolverFailure, "capacity LP: " + sol.note);
  if (sol.status != lp::Status::Feasible) {
    // Only reachable when the idle-time slack is positive but smaller than the
    // eps-inflated targets need.
    res.outcome = SynthesisOutcome::NotStabilizable;
    res.verdict.stabilizable = false;
    res.verdict.binding_constraint += " (occupancy LP infeasible at R = 1 - q_max + eps)";
    return res;
  }
  design.policy = extract_policy(design.mdp, OccupancyMeasure{sol.values});
  design.performance = forward_propagate(design.mdp, design.policy);
  for (int i = 0; i < design.mdp.n; ++i) {
    const double q_max = max_dropout_rate(cfg.plants[i].a, h, cfg.slot_length);
    design.subsystems.push_back(design_controller(cfg, i, q_max - eps, targets[i]));
  }
  res.outcome = SynthesisOutcome::Synthesized;
  res.design = std::move(design);
  return res;
}

SynthesisResult synthesize_heterogeneous(const SystemConfig& cfg, MdpLimits limits,
                                         lp::SolveOptions lp_opts) {
  SynthesisResult res;
  HeterogeneousPlan plan = make_plan(cfg);
  CoDesign design;
  design.heterogeneous = true;
  design.mdp = build_mdp(cfg, limits);
  const CapacityLp clp = build_heterogeneous_lp(cfg, plan, limits);
  std::vector<std::size_t> rows(clp.windows.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const double eps = cfg.feasibility_margin;
  const auto sol = lp::solve_with_margin(clp.problem, rows, eps, -1.0, 1.0, lp_opts);
  if (sol.lp.status == lp::Status::SolverFailure)
    throw Error(ErrorKind::SolverFailure, "heterogeneous LP: " + sol.lp.note);

  res.verdict.margin = eps;
  res.verdict.slack = sol.margin;
  res.verdict.stabilizable = sol.strictly_feasible;
  if (!sol.strictly_feasible) {
    res.outcome = SynthesisOutcome::SufficientConditionNotMet;
    res.verdict.binding_constraint =
        "sufficient condition not met: no occupancy measure delivers every period above 1 - q_max^i";
    return res;
  }
  res.verdict.binding_constraint = "per-period delivery > 1 - q_max^i(A_i, h_i) for every window";

  design.lp_margin = sol.margin;
  design.policy = extract_policy(design.mdp, OccupancyMeasure{sol.lp.values});
  design.performance = forward_propagate(design.mdp, design.policy);
  plan.delivery = design.performance.window_delivery;
  plan.dropout = plan.delivery;
  for (int i = 0; i < design.mdp.n; ++i) {
    double worst = 0.0;
    for (double& q : plan.dropout[i]) {
      q = 1.0 - q;
      worst = std::max(worst, q);
    }
    const double q_max = max_dropout_rate(cfg.plants[i].a, cfg.sampling_periods[i], cfg.slot_length);
    design.subsystems.push_back(design_controller(cfg, i, worst, 1.0 - q_max + eps));
  }
  design.plan = std::move(plan);
  res.outcome = SynthesisOutcome::Synthesized;
  res.design = std::move(design);
  return res;
}

}  // namespace

SynthesisResult synthesize(const SystemConfig& config, MdpLimits limits, lp::SolveOptions lp_opts) {
  const SystemConfig cfg = validate(config);
  return cfg.homogeneous() ? synthesize_homogeneous(cfg, limits, lp_opts)
                           : synthesize_heterogeneous(cfg, limits, lp_opts);
}

std::string state_bits(StateMask s, int n) {
  std::string out(static_cast<std::size_t>(n), '0');
  for (int i = 0; i < n; ++i)
    if ((s >> i) & 1u) out[static_cast<std::size_t>(i)] = '1';
  return out;
}

std::string policy_to_json(const SchedulingPolicy& policy) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  char buf[32];
  for (int t = 0; t < policy.horizon; ++t) {
    nlohmann::ordered_json slot = nlohmann::ordered_json::object();
    for (StateMask s = 0; s < policy.num_states(); ++s) {
      nlohmann::ordered_json row = nlohmann::ordered_json::object();
      const auto cond = policy.conditional(t, s);
      for (int a = 0; a < policy.n; ++a) {
        if (cond[a] <= 0.0) continue;
        std::snprintf(buf, sizeof buf, "%.12g", cond[a]);
        row[std::to_string(a + 1)] = buf;
      }
      slot[state_bits(s, policy.n)] = std::move(row);
    }
    doc[std::to_string(t + 1)] = std::move(slot);
  }
  return doc.dump(2);
}

}  // namespace wncs
