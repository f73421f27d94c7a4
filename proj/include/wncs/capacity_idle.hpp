#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wncs/model.hpp"

namespace wncs {

// Distribution of X_S = min(sum_{i in S} Theta_i, h), Theta_i ~ Geometric(p_i)
// on {1,2,...}. probs[t] = P(X_S = t) for t = 0..h.
struct BusySlotPmf {
  std::vector<double> probs;
  std::vector<int> subset;  // 1-based, sorted

  double expected_busy() const;
  int horizon() const { return static_cast<int>(probs.size()) - 1; }
};

// One truncated convolution step: the pmf of min(X + Theta, h) given the pmf
// of X (length h + 1) and Theta ~ Geometric(p). Writes into `out`.
void extend_busy_pmf(std::span<const double> pmf, double p, std::span<double> out);

BusySlotPmf busy_pmf(std::span<const int> subset, std::span<const double> channel, int h);

// E[I_S] = h - E[X_S].
double expected_idle(std::span<const int> subset, std::span<const double> channel, int h);

// Minimum over nonempty S of  E[X_S] - sum_{i in S} R_i / p_i ; the
// throughput vector R lies in the idle-time region iff this is >= 0.
struct RegionSlack {
  double slack = 0.0;
  std::uint64_t binding_mask = 0;  // bit i <-> sub-system i+1
};

struct SubsetSweepOptions {
  int max_flows = 20;
  // Flows whose inclusion pattern defines one parallel task. Fixed so that
  // results do not depend on the thread count.
  int partition_depth = 6;
  int threads = 0;  // 0: OpenMP default
};

// Serial reference: every subset pmf convolved from scratch.
RegionSlack idle_region_slack_serial(std::span<const double> targets,
                                     std::span<const double> channel, int h,
                                     SubsetSweepOptions opts = {});
// Depth-first sweep sharing prefix convolutions, partitioned across OpenMP threads.
RegionSlack idle_region_slack(std::span<const double> targets, std::span<const double> channel,
                              int h, SubsetSweepOptions opts = {});

std::vector<int> mask_to_subset(std::uint64_t mask);

// Throughput requirement 1 - q_max^i per sub-system at the common period.
std::vector<double> stability_targets(const SystemConfig& config, int h);

// Idle-time test over all 2^N - 1 nonempty subsets; stabilizable iff the
// tightest slack exceeds the config margin.
StabilityVerdict check_stability_general(const SystemConfig& config, SubsetSweepOptions opts = {});
StabilityVerdict check_stability_general_serial(const SystemConfig& config,
                                                SubsetSweepOptions opts = {});

// All-perfect-channel single inequality  h - sum_i (1 - q_max^i) > margin.
StabilityVerdict check_stability_perfect(const SystemConfig& config);
StabilityVerdict check_stability_perfect_at(const SystemConfig& config, int h);
int min_sampling_period_perfect(const SystemConfig& config);

// E[min(sum of n i.i.d. Geometric(p), h)] from the explicit negative-binomial pmf.
double symmetric_expected_busy(int n, double p, int h);

// Closed form for n identical plants on identical channels. The slack is
// expressed in the same units as the general test's [N] inequality:
// E[X_[N]] - n (1 - q_max) / p.
StabilityVerdict check_stability_symmetric(int n, double a, double p, int h, double delta,
                                           double margin = kDefaultMargin);

struct ChannelQualityBound {
  bool achievable = false;
  double p_min = 1.0;
  double lo = 0.0;  // largest probed unstable p (0 when never probed)
  double hi = 1.0;  // smallest probed stable p
};

ChannelQualityBound min_channel_quality_symmetric(int n, double a, int h, double delta,
                                                  double tol = 1e-4,
                                                  double margin = kDefaultMargin);

}  // namespace wncs
