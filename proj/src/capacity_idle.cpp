#include "wncs/capacity_idle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <omp.h>

#include "wncs/control.hpp"

namespace wncs {

double BusySlotPmf::expected_busy() const {
  double e = 0.0;
  for (std::size_t t = 1; t < probs.size(); ++t) e += static_cast<double>(t) * probs[t];
  return e;
}

void extend_busy_pmf(std::span<const double> pmf, double p, std::span<double> out) {
  const int h = static_cast<int>(pmf.size()) - 1;
  std::fill(out.begin(), out.end(), 0.0);
  out[h] = pmf[h];
  const double fail = 1.0 - p;
  for (int t = 0; t < h; ++t) {
    const double mass = pmf[t];
    if (mass == 0.0) continue;
    // Theta = k with probability fail^{k-1} p while t + k < h; the rest of
    // the tail, P(Theta >= h - t) = fail^{h-t-1}, lands on the cap.
    double run = 1.0;
    for (int k = 1; t + k < h; ++k) {
      out[t + k] += mass * run * p;
      run *= fail;
    }
    out[h] += mass * run;
  }
}

BusySlotPmf busy_pmf(std::span<const int> subset, std::span<const double> channel, int h) {
  BusySlotPmf pmf;
  pmf.subset.assign(subset.begin(), subset.end());
  std::sort(pmf.subset.begin(), pmf.subset.end());
  pmf.probs.assign(h + 1, 0.0);
  pmf.probs[0] = 1.0;
  std::vector<double> scratch(h + 1);
  for (int i : pmf.subset) {
    extend_busy_pmf(pmf.probs, channel[i - 1], scratch);
    pmf.probs.swap(scratch);
  }
  return pmf;
}

double expected_idle(std::span<const int> subset, std::span<const double> channel, int h) {
  return static_cast<double>(h) - busy_pmf(subset, channel, h).expected_busy();
}

std::vector<int> mask_to_subset(std::uint64_t mask) {
  std::vector<int> out;
  for (int i = 0; mask != 0; ++i, mask >>= 1)
    if (mask & 1u) out.push_back(i + 1);
  return out;
}

namespace {

bool better(double slack, std::uint64_t mask, const RegionSlack& best) {
  return slack < best.slack || (slack == best.slack && mask < best.binding_mask);
}

void check_size(std::size_t n, const SubsetSweepOptions& opts) {
  if (n == 0) throw Error(ErrorKind::InvalidConfig, "no sub-systems");
  if (static_cast<int>(n) > opts.max_flows || n > 62)
    throw Error(ErrorKind::TooLarge, std::to_string(n) +
                                         " sub-systems exceed the subset-enumeration cap of " +
                                         std::to_string(opts.max_flows));
}

double expected_busy(std::span<const double> pmf) {
  double e = 0.0;
  for (std::size_t t = 1; t < pmf.size(); ++t) e += static_cast<double>(t) * pmf[t];
  return e;
}

// Depth-first enumeration of the flows [first, n); the pmf of the flows
// already included lives at level 0 of `stack`.
struct SubsetWalker {
  std::span<const double> targets;
  std::span<const double> channel;
  int h;
  std::vector<std::vector<double>> stack;
  RegionSlack best{std::numeric_limits<double>::infinity(), 0};

  void walk(std::size_t flow, std::size_t level, std::uint64_t mask, double load) {
    if (flow == channel.size()) {
      if (mask == 0) return;
      const double slack = expected_busy(stack[level]) - load;
      if (better(slack, mask, best)) best = {slack, mask};
      return;
    }
    // Exclude first, then include; both reuse the current level.
    walk(flow + 1, level, mask, load);
    extend_busy_pmf(stack[level], channel[flow], stack[level + 1]);
    walk(flow + 1, level + 1, mask | (std::uint64_t{1} << flow),
         load + targets[flow] / channel[flow]);
  }
};

}  // namespace

RegionSlack idle_region_slack_serial(std::span<const double> targets,
                                     std::span<const double> channel, int h,
                                     SubsetSweepOptions opts) {
  check_size(channel.size(), opts);
  const std::size_t n = channel.size();
  RegionSlack best{std::numeric_limits<double>::infinity(), 0};
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
    const auto subset = mask_to_subset(mask);
    double load = 0.0;
    for (int i : subset) load += targets[i - 1] / channel[i - 1];
    const double slack = busy_pmf(subset, channel, h).expected_busy() - load;
    if (better(slack, mask, best)) best = {slack, mask};
  }
  return best;
}

RegionSlack idle_region_slack(std::span<const double> targets, std::span<const double> channel,
                              int h, SubsetSweepOptions opts) {
  check_size(channel.size(), opts);
  const std::size_t n = channel.size();
  const std::size_t depth = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(0, opts.partition_depth)));
  const std::int64_t tasks = std::int64_t{1} << depth;
  std::vector<RegionSlack> results(static_cast<std::size_t>(tasks));

#pragma omp parallel for schedule(dynamic) num_threads(opts.threads > 0 ? opts.threads : omp_get_max_threads())
  for (std::int64_t task = 0; task < tasks; ++task) {
    SubsetWalker w{targets, channel, h, {}, {}};
    w.best = {std::numeric_limits<double>::infinity(), 0};
    w.stack.assign(n + 1, std::vector<double>(h + 1, 0.0));
    w.stack[0][0] = 1.0;
    std::size_t level = 0;
    double load = 0.0;
    const auto prefix = static_cast<std::uint64_t>(task);
    for (std::size_t i = 0; i < depth; ++i) {
      if (!((prefix >> i) & 1u)) continue;
      extend_busy_pmf(w.stack[level], channel[i], w.stack[level + 1]);
      ++level;
      load += targets[i] / channel[i];
    }
    w.walk(depth, level, prefix, load);
    results[static_cast<std::size_t>(task)] = w.best;
  }

  RegionSlack best{std::numeric_limits<double>::infinity(), 0};
  for (const auto& r : results)
    if (r.binding_mask != 0 && better(r.slack, r.binding_mask, best)) best = r;
  return best;
}

std::vector<double> stability_targets(const SystemConfig& config, int h) {
  std::vector<double> out;
  out.reserve(config.size());
  for (const auto& p : config.plants) out.push_back(1.0 - max_dropout_rate(p.a, h, config.slot_length));
  return out;
}

namespace {

StabilityVerdict general_verdict(const SystemConfig& config, const RegionSlack& r) {
  StabilityVerdict v;
  v.margin = config.feasibility_margin;
  v.slack = r.slack;
  v.stabilizable = r.slack > config.feasibility_margin;
  v.binding_subset = mask_to_subset(r.binding_mask);
  v.binding_constraint = "S={" + subset_label(v.binding_subset) +
                         "}: sum_S (1-q_max^i)/p_i + E[I_S] < h";
  return v;
}

}  // namespace

StabilityVerdict check_stability_general(const SystemConfig& config, SubsetSweepOptions opts) {
  const int h = config.period();
  const auto targets = stability_targets(config, h);
  return general_verdict(config, idle_region_slack(targets, config.channel, h, opts));
}

StabilityVerdict check_stability_general_serial(const SystemConfig& config,
                                                SubsetSweepOptions opts) {
  const int h = config.period();
  const auto targets = stability_targets(config, h);
  return general_verdict(config, idle_region_slack_serial(targets, config.channel, h, opts));
}

StabilityVerdict check_stability_perfect_at(const SystemConfig& config, int h) {
  for (double p : config.channel)
    if (p != 1.0)
      throw Error(ErrorKind::WrongSpecialization, "perfect-channel test requires every p_i = 1");
  double load = 0.0;
  for (const auto& p : config.plants) load += 1.0 - max_dropout_rate(p.a, h, config.slot_length);
  StabilityVerdict v;
  v.margin = config.feasibility_margin;
  v.slack = static_cast<double>(h) - load;
  v.stabilizable = v.slack > config.feasibility_margin;
  v.binding_constraint = "sum_i (1-q_max^i) < h";
  for (std::size_t i = 0; i < config.size(); ++i) v.binding_subset.push_back(static_cast<int>(i) + 1);
  return v;
}

StabilityVerdict check_stability_perfect(const SystemConfig& config) {
  return check_stability_perfect_at(config, config.period());
}

int min_sampling_period_perfect(const SystemConfig& config) {
  const int n = static_cast<int>(config.size());
  // Every h > N passes (slack >= h - N >= 1), so scanning down from N finds
  // the smallest m with all of [m, N] stable.
  int m = n + 1;
  for (int h = n; h >= 1; --h) {
    if (!check_stability_perfect_at(config, h).stabilizable) break;
    m = h;
  }
  return m;
}

namespace {

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (int j = 1; j <= k; ++j) c = c * static_cast<double>(n - k + j) / static_cast<double>(j);
  return c;
}

}  // namespace

double symmetric_expected_busy(int n, double p, int h) {
  if (h <= n) return static_cast<double>(h);
  const double f = 1.0 - p;
  double e = n * std::pow(p, n);
  for (int k = 1; k <= h - n - 1; ++k)
    e += (n + k) * binomial(n + k - 1, k) * std::pow(f, k) * std::pow(p, n);
  double tail = binomial(h - 1, h - n) * std::pow(f, h - n) * std::pow(p, n);
  for (int i = 0; i <= n - 1; ++i) tail += binomial(h, i) * std::pow(f, h - i) * std::pow(p, i);
  return e + h * tail;
}

StabilityVerdict check_stability_symmetric(int n, double a, double p, int h, double delta,
                                           double margin) {
  const double load = n * (1.0 - max_dropout_rate(a, h, delta)) / p;
  StabilityVerdict v;
  v.margin = margin;
  v.slack = symmetric_expected_busy(n, p, h) - load;
  v.stabilizable = v.slack > margin;
  v.binding_constraint = h <= n ? "(1-q_max)/p < h/N" : "(1-q_max)/p < E[X]/N";
  for (int i = 1; i <= n; ++i) v.binding_subset.push_back(i);
  return v;
}

ChannelQualityBound min_channel_quality_symmetric(int n, double a, int h, double delta,
                                                  double tol, double margin) {
  ChannelQualityBound out;
  if (!check_stability_symmetric(n, a, 1.0, h, delta, margin).stabilizable) {
    out.achievable = false;
    out.p_min = 1.0;
    out.lo = 1.0;
    return out;
  }
  out.achievable = true;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (check_stability_symmetric(n, a, mid, h, delta, margin).stabilizable ? hi : lo) = mid;
  }
  out.lo = lo;
  out.hi = hi;
  out.p_min = 0.5 * (lo + hi);
  return out;
}

}  // namespace wncs
