#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <json.hpp>

#include "wncs/capacity_idle.hpp"
#include "wncs/capacity_mdp.hpp"
#include "wncs/control.hpp"

using namespace wncs;

namespace {

SystemConfig make_config(std::vector<double> a, std::vector<double> p, std::vector<int> h, double delta) {
  SystemConfig c;
  for (double v : a) c.plants.push_back({v, 1.0});
  c.channel = std::move(p);
  c.sampling_periods = std::move(h);
  c.slot_length = delta;
  return c;
}

SystemConfig three_loop_config() {
  return make_config({6.5137, 5.8265, 8.8964}, {0.7690, 0.7277, 0.2846}, {5, 5, 5}, 0.01);
}

}  // namespace

TEST_CASE("kernel: pending flow served mid-frame") {
  const auto mdp = build_mdp(make_config({1, 1}, {1.0, 0.5}, {4, 4}, 0.1));
  std::array<Transition, 2> out{};
  // state 11, serve flow 2 at slot 2 (0-based 1): success clears bit 2
  REQUIRE(mdp.transitions(1, 0b11, 1, out) == 2);
  CHECK(out[0].next == 0b01);
  CHECK(out[0].prob == 0.5);
  CHECK(out[1].next == 0b11);
  CHECK(out[1].prob == 0.5);
  CHECK(state_bits(0b01, 2) == "10");
  // perfect flow 1 always clears
  REQUIRE(mdp.transitions(1, 0b11, 0, out) == 1);
  CHECK(out[0].next == 0b10);
  // serving an idle flow wastes the slot
  REQUIRE(mdp.transitions(1, 0b01, 1, out) == 1);
  CHECK(out[0].next == 0b01);
  // the last slot re-arms everything
  REQUIRE(mdp.transitions(3, 0b00, 0, out) == 1);
  CHECK(out[0].next == 0b11);
  CHECK(mdp.reward(1, 0b11, 1) == 0.5);
  CHECK(mdp.reward(1, 0b01, 1) == 0.0);
  CHECK(mdp.reward(0, 0b11, 1) == 0.0);
}

TEST_CASE("kernel rows are stochastic and heterogeneous flows re-arm on their own clock") {
  const auto mdp = build_mdp(make_config({1, 1, 1}, {0.3, 0.6, 1.0}, {1, 2, 3}, 0.1));
  CHECK(mdp.horizon == 6);
  CHECK(mdp.num_variables() == 6u * 8u * 3u);
  std::array<Transition, 2> out{};
  for (int t = 0; t < mdp.horizon; ++t)
    for (StateMask s = 0; s < mdp.num_states(); ++s)
      for (int a = 0; a < 3; ++a) {
        const int k = mdp.transitions(t, s, a, out);
        double sum = 0.0;
        for (int o = 0; o < k; ++o) {
          sum += out[o].prob;
          const int next = (t + 1) % mdp.horizon;
          for (int i = 0; i < 3; ++i)
            if (mdp.resets_at(i, next)) CHECK(((out[o].next >> i) & 1u) == 1u);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
      }
}

TEST_CASE("MDP size limits") {
  MdpLimits lim;
  lim.max_flows = 2;
  CHECK_THROWS_AS(build_mdp(make_config({1, 1, 1}, {1, 1, 1}, {2, 2, 2}, 0.1), lim), Error);
  lim = {};
  lim.max_horizon = 5;
  CHECK_THROWS_AS(build_mdp(make_config({1, 1}, {1, 1}, {2, 3}, 0.1), lim), Error);
  lim = {};
  lim.max_variables = 10;
  CHECK_THROWS_AS(build_mdp(make_config({1, 1}, {1, 1}, {4, 4}, 0.1), lim), Error);
}

TEST_CASE("zero targets are always feasible and a hand-built schedule certifies R = (1, 1)") {
  const auto cfg = make_config({1, 1}, {1.0, 1.0}, {2, 2}, 0.1);
  const auto mdp = build_mdp(cfg);
  const std::vector<double> zero = {0.0, 0.0};
  CHECK(lp::solve(build_capacity_lp(mdp, zero).problem).status == lp::Status::Feasible);

  const std::vector<double> full = {1.0, 1.0};
  const auto clp = build_capacity_lp(mdp, full);
  CHECK(clp.windows.size() == 2);
  // slot 1: serve flow 1 in 11; slot 2: serve flow 2 in 01
  std::vector<double> x(mdp.num_variables(), 0.0);
  x[mdp.variable_index(0, 0b11, 0)] = 1.0;
  x[mdp.variable_index(1, 0b10, 1)] = 1.0;
  CHECK(lp::max_violation(clp.problem, x) <= 1e-15);
  const auto sol = lp::solve(clp.problem);
  REQUIRE(sol.status == lp::Status::Feasible);

  const std::vector<double> over = {1.0, 1.0 + 1e-3};
  CHECK(lp::solve(build_capacity_lp(mdp, over).problem).status == lp::Status::Infeasible);
}

TEST_CASE("region membership agrees with the idle-time test away from the boundary") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> pu(0.2, 1.0), au(0.5, 12.0);
  int agree = 0, decided = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 2;
    const int h = 2 + trial % 3;
    std::vector<double> a, p;
    for (int i = 0; i < n; ++i) a.push_back(au(rng)), p.push_back(pu(rng));
    auto cfg = make_config(a, p, std::vector<int>(n, h), 0.01);
    const auto targets = stability_targets(cfg, h);
    const auto slack = idle_region_slack(targets, cfg.channel, h);
    if (std::abs(slack.slack) <= 1e-6) continue;
    ++decided;
    const auto m = region_membership(cfg, targets);
    CAPTURE(trial);
    CHECK(m.feasible == (slack.slack > 0));
    agree += m.feasible == (slack.slack > 0);
  }
  CHECK(decided > 20);
  CHECK(agree == decided);
}

TEST_CASE("extracted policies are distributions and reproduce the occupancy") {
  const auto cfg = three_loop_config();
  const auto res = synthesize(cfg);
  REQUIRE(res.outcome == SynthesisOutcome::Synthesized);
  const auto& d = *res.design;
  for (int t = 0; t < d.policy.horizon; ++t)
    for (StateMask s = 0; s < d.policy.num_states(); ++s) {
      const auto c = d.policy.conditional(t, s);
      double sum = 0.0;
      for (double v : c) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  // forward propagation: marginals sum to one, targets met
  const auto& perf = d.performance;
  for (int t = 0; t < d.mdp.horizon; ++t) {
    double sum = 0.0;
    for (StateMask s = 0; s < d.mdp.num_states(); ++s) sum += perf.marginals[t * d.mdp.num_states() + s];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (int i = 0; i < d.mdp.n; ++i) {
    REQUIRE(perf.window_delivery[i].size() == 1);
    CHECK(perf.window_delivery[i][0] >= d.subsystems[i].target - 1e-8);
    CHECK(d.subsystems[i].design_q < d.subsystems[i].q_max);
    CHECK(d.subsystems[i].dare.residual < 1e-10);
  }
}

TEST_CASE("fallback choices in states without occupancy mass") {
  const auto mdp = build_mdp(make_config({1, 1, 1}, {1, 1, 1}, {2, 2, 2}, 0.1));
  OccupancyMeasure empty{std::vector<double>(mdp.num_variables(), 0.0)};
  const auto pol = extract_policy(mdp, empty);
  CHECK(pol.prob(0, 0b000, 0) == 1.0);
  CHECK(pol.prob(0, 0b101, 0) == 0.5);
  CHECK(pol.prob(0, 0b101, 2) == 0.5);
  CHECK(pol.prob(0, 0b101, 1) == 0.0);
}

TEST_CASE("constant policy propagation matches a hand computation") {
  // serve flow 1 (p = 0.5) for h = 3 slots: delivery = 1 - 0.5^3
  const auto mdp = build_mdp(make_config({1, 1}, {0.5, 0.9}, {3, 3}, 0.1));
  const auto perf = forward_propagate(mdp, constant_policy(mdp, 0));
  CHECK(perf.window_delivery[0][0] == doctest::Approx(0.875).epsilon(1e-15));
  CHECK(perf.window_delivery[1][0] == 0.0);
}

TEST_CASE("heterogeneous plan and LP layout") {
  const auto cfg = make_config({0.1, 0.1, 0.1}, {1, 1, 1}, {1, 2, 3}, 0.01);
  const auto plan = make_plan(cfg);
  CHECK(plan.big_frame == 6);
  CHECK(plan.repetitions == std::vector<int>{6, 3, 2});
  CHECK(plan.window_count() == 11);
  const auto clp = build_heterogeneous_lp(cfg, plan);
  REQUIRE(clp.windows.size() == 11);
  CHECK(clp.problem.inequalities.size() == 11);
  const auto& w = clp.windows[7];  // flow 2, period 2
  CHECK(w.flow == 1);
  CHECK(w.index == 1);
  CHECK(w.first_slot == 2);
  CHECK(w.last_slot == 3);
  CHECK(w.target == doctest::Approx(1.0 - max_dropout_rate(0.1, 2, 0.01)));

  // equal periods collapse to one window per flow
  const auto eq = make_config({1, 1}, {0.7, 0.8}, {3, 3}, 0.1);
  CHECK(build_heterogeneous_lp(eq, make_plan(eq)).windows.size() == 2);
}

TEST_CASE("synthesis outcomes") {
  SUBCASE("sim-param1 homogeneous") {
    const auto res = synthesize(three_loop_config());
    CHECK(res.outcome == SynthesisOutcome::Synthesized);
    CHECK_FALSE(res.design->heterogeneous);
  }
  SUBCASE("poor symmetric channel is not stabilizable") {
    const auto res = synthesize(make_config({1, 1}, {0.3, 0.3}, {5, 5}, 0.1));
    CHECK(res.outcome == SynthesisOutcome::NotStabilizable);
    CHECK_FALSE(res.design.has_value());
    CHECK_FALSE(res.verdict.binding_subset.empty());
  }
  SUBCASE("heterogeneous periods") {
    const auto res = synthesize(make_config({0.1, 0.1, 0.1}, {1, 1, 1}, {1, 2, 3}, 0.01));
    REQUIRE(res.outcome == SynthesisOutcome::Synthesized);
    const auto& d = *res.design;
    CHECK(d.heterogeneous);
    REQUIRE(d.plan.has_value());
    for (int i = 0; i < 3; ++i) {
      CHECK(d.plan->dropout[i].size() == static_cast<std::size_t>(d.plan->repetitions[i]));
      double worst = 0.0;
      for (double q : d.plan->dropout[i]) worst = std::max(worst, q);
      CHECK(d.subsystems[i].design_q == doctest::Approx(worst));
      CHECK(worst < d.subsystems[i].q_max);
    }
  }
  SUBCASE("heterogeneous LP infeasible") {
    const auto res = synthesize(make_config({5, 5}, {1, 1}, {1, 2}, 0.1));
    CHECK(res.outcome == SynthesisOutcome::SufficientConditionNotMet);
    CHECK(std::string(to_string(res.outcome)) == "sufficient condition not met");
    CHECK(res.verdict.binding_constraint.find("sufficient condition not met") != std::string::npos);
  }
}

TEST_CASE("policy JSON layout") {
  const auto mdp = build_mdp(make_config({1, 1}, {1, 1}, {2, 2}, 0.1));
  SchedulingPolicy pol = constant_policy(mdp, 1);
  pol.probs[mdp.variable_index(0, 0b11, 0)] = 0.25;
  pol.probs[mdp.variable_index(0, 0b11, 1)] = 0.75;
  const auto doc = nlohmann::json::parse(policy_to_json(pol));
  CHECK(doc.size() == 2);
  CHECK(doc["1"]["11"]["1"] == "0.25");
  CHECK(doc["1"]["11"]["2"] == "0.75");
  CHECK(doc["2"]["10"].size() == 1);
  CHECK(doc["2"]["10"]["2"] == "1");
  CHECK(policy_to_json(pol) == policy_to_json(pol));
}
