#include "wncs/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>

#include <boost/math/distributions/students_t.hpp>
#include <omp.h>

#include "wncs/rng.hpp"

namespace wncs {

namespace {

constexpr std::uint64_t kActionLane = 0;
constexpr std::uint64_t kChannelLane = 1;

struct PlantRunState {
  ControllerState ctrl;
  double x = 0.0;
  double u_prev = 0.0;      // u_{k-1}
  std::uint8_t gamma_prev = 0;  // gamma_{k-1}
  std::uint8_t delivered = 0;
};

void simulate_run(const SystemConfig& cfg, const CoDesign& design, int frames, const KeyedRng& rng,
                  std::span<const double> x0, std::vector<SubsystemTrace>& out) {
  const MdpModel& mdp = design.mdp;
  const int n = mdp.n;
  std::vector<PlantRunState> st(n);
  out.assign(n, {});
  for (int i = 0; i < n; ++i) {
    const int periods = frames * (mdp.horizon / mdp.periods[i]);
    out[i].x.reserve(periods + 1);
    out[i].u.reserve(periods);
    out[i].gamma.reserve(periods);
    st[i].ctrl = design.subsystems[i].controller;
    st[i].x = x0[i];
    out[i].x.push_back(st[i].x);
  }

  StateMask pending = 0;
  const long total = static_cast<long>(frames) * mdp.horizon;
  for (long slot = 0; slot < total; ++slot) {
    const int local = static_cast<int>(slot % mdp.horizon);
    for (int i = 0; i < n; ++i) {
      if (slot % mdp.periods[i] != 0) continue;
      const auto step = control_input(st[i].ctrl, design.subsystems[i].plant, st[i].x);
      st[i].ctrl = step.next;
      out[i].u.push_back(step.u);
      pending |= StateMask{1} << i;
      st[i].delivered = 0;
    }

    const auto cond = design.policy.conditional(local, pending);
    const double draw = rng.uniform(static_cast<std::uint64_t>(slot), kActionLane);
    int action = n - 1;
    double acc = 0.0;
    for (int a = 0; a < n; ++a) {
      acc += cond[a];
      if (draw < acc) {
        action = a;
        break;
      }
    }
    // Trailing zero-probability actions must never be chosen by rounding.
    while (cond[action] == 0.0 && action > 0) --action;

    if ((pending >> action) & 1u) {
      if (rng.uniform(static_cast<std::uint64_t>(slot), kChannelLane) < cfg.channel[action]) {
        pending &= ~(StateMask{1} << action);
        st[action].delivered = 1;
      }
    }

    for (int i = 0; i < n; ++i) {
      if ((slot + 1) % mdp.periods[i] != 0) continue;
      const DiscretePlant& pl = design.subsystems[i].plant;
      const double u_k = out[i].u.back();
      out[i].gamma.push_back(st[i].delivered);
      // x_{k+1} = a_bar x_k + gamma_{k-1} b_bar u_{k-1}
      st[i].x = pl.a_bar * st[i].x + (st[i].gamma_prev ? pl.b_bar * st[i].u_prev : 0.0);
      out[i].x.push_back(st[i].x);
      st[i].gamma_prev = st[i].delivered;
      st[i].u_prev = u_k;
      pending &= ~(StateMask{1} << i);
    }
  }
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double d : v) s += d;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace

TraceEnsemble simulate(const SystemConfig& config, const CoDesign& design, int frames, int runs,
                       std::uint64_t seed, SimulationOptions opts) {
  const SystemConfig cfg = validate(config);
  const int n = design.mdp.n;
  if (static_cast<int>(cfg.size()) != n || static_cast<int>(design.subsystems.size()) != n)
    throw Error(ErrorKind::InvalidConfig, "co-design does not match the configuration");
  if (frames < 0 || runs < 0) throw Error(ErrorKind::InvalidConfig, "frames and runs must be >= 0");

  std::vector<double> x0 = opts.initial_state;
  if (x0.empty()) x0.assign(n, 1.0);
  if (static_cast<int>(x0.size()) != n)
    throw Error(ErrorKind::InvalidConfig, "initial_state must have one entry per sub-system");

  TraceEnsemble ens;
  ens.seed = seed;
  ens.runs = runs;
  ens.big_frames = frames;
  ens.periods = design.mdp.periods;
  for (int h : ens.periods) ens.repetitions.push_back(design.mdp.horizon / h);
  for (const auto& s : design.subsystems) ens.plants.push_back(s.plant);
  ens.traces.resize(runs);
  ens.run_keys.resize(runs);

  auto one = [&](int r) {
    const KeyedRng rng(seed, static_cast<std::uint64_t>(r));
    ens.run_keys[r] = rng.key();
    simulate_run(cfg, design, frames, rng, x0, ens.traces[r]);
  };
  if (opts.parallel) {
#pragma omp parallel for schedule(dynamic) num_threads(opts.threads > 0 ? opts.threads : omp_get_max_threads())
    for (int r = 0; r < runs; ++r) one(r);
  } else {
    for (int r = 0; r < runs; ++r) one(r);
  }
  return ens;
}

std::vector<std::vector<DropoutEstimate>> empirical_dropout(const TraceEnsemble& traces,
                                                            long min_samples) {
  std::vector<std::vector<DropoutEstimate>> out(traces.subsystems());
  for (int i = 0; i < traces.subsystems(); ++i) {
    const int reps = traces.repetitions[i];
    std::vector<long> drops(reps, 0), count(reps, 0);
    for (const auto& run : traces.traces) {
      const auto& g = run[i].gamma;
      for (std::size_t k = 0; k < g.size(); ++k) {
        const std::size_t j = k % static_cast<std::size_t>(reps);
        ++count[j];
        drops[j] += g[k] ? 0 : 1;
      }
    }
    out[i].resize(reps);
    for (int j = 0; j < reps; ++j) {
      DropoutEstimate& e = out[i][j];
      e.samples = count[j];
      e.inconclusive = count[j] < min_samples;
      if (count[j] == 0) continue;
      const double m = static_cast<double>(count[j]);
      e.estimate = static_cast<double>(drops[j]) / m;
      e.std_error = std::sqrt(e.estimate * (1.0 - e.estimate) / m);
    }
  }
  return out;
}

double lag1_autocorrelation(const TraceEnsemble& traces, int subsystem) {
  double sum = 0.0;
  long n = 0;
  for (const auto& run : traces.traces)
    for (auto g : run[subsystem].gamma) {
      sum += g;
      ++n;
    }
  if (n < 2) return 0.0;
  const double mean = sum / static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (const auto& run : traces.traces) {
    const auto& g = run[subsystem].gamma;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double d = g[k] - mean;
      den += d * d;
      if (k + 1 < g.size()) num += d * (g[k + 1] - mean);
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

const char* to_string(DecayVerdict v) {
  switch (v) {
    case DecayVerdict::Decaying: return "decaying";
    case DecayVerdict::NotDecaying: return "not-decaying";
    case DecayVerdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

std::vector<double> mean_square(const TraceEnsemble& traces, int subsystem) {
  const int len = traces.periods_of(subsystem) + 1;
  std::vector<double> out(len, 0.0);
  if (traces.runs == 0) return out;
  std::vector<double> col(traces.runs);
  for (int k = 0; k < len; ++k) {
    for (int r = 0; r < traces.runs; ++r) {
      const double x = traces.traces[r][subsystem].x[k];
      col[r] = x * x;
    }
    out[k] = pairwise_sum(col) / static_cast<double>(traces.runs);
  }
  return out;
}

std::vector<StabilityDiagnostic> stability_diagnostic(const TraceEnsemble& traces, double confidence) {
  std::vector<StabilityDiagnostic> out(traces.subsystems());
  for (int i = 0; i < traces.subsystems(); ++i) {
    StabilityDiagnostic& d = out[i];
    d.confidence = confidence;
    d.mean_square = mean_square(traces, i);
    const int len = static_cast<int>(d.mean_square.size());
    if (len - 1 < 50) {
      d.verdict = DecayVerdict::Inconclusive;
      d.note = "fewer than 50 frames";
      continue;
    }
    const int first = len / 2;
    bool all_zero = true;
    for (int k = first; k < len; ++k) all_zero = all_zero && d.mean_square[k] == 0.0;
    if (all_zero) {
      d.verdict = DecayVerdict::Decaying;
      d.note = "mean square identically zero";
      continue;
    }

    const int m = len - first;
    double sx = 0.0, sy = 0.0;
    std::vector<double> y(m);
    for (int k = 0; k < m; ++k) {
      y[k] = std::log(d.mean_square[first + k] + kLogFloor);
      sx += first + k;
      sy += y[k];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0.0, sxy = 0.0;
    for (int k = 0; k < m; ++k) {
      const double dx = first + k - mx;
      sxx += dx * dx;
      sxy += dx * (y[k] - my);
    }
    d.slope = sxy / sxx;
    double ssr = 0.0;
    for (int k = 0; k < m; ++k) {
      const double e = y[k] - (my + d.slope * (first + k - mx));
      ssr += e * e;
    }
    d.slope_std_error = std::sqrt(ssr / (m - 2) / sxx);
    const boost::math::students_t dist(m - 2);
    const double tq = boost::math::quantile(dist, confidence);
    if (d.slope + tq * d.slope_std_error < 0.0)
      d.verdict = DecayVerdict::Decaying;
    else if (d.slope - tq * d.slope_std_error > 0.0)
      d.verdict = DecayVerdict::NotDecaying;
    else
      d.verdict = DecayVerdict::Inconclusive;
  }
  return out;
}

void write_trace_csv(const TraceEnsemble& traces, std::ostream& out) {
  char buf[128];
  out << "run,frame,subsystem,x,u,gamma\n";
  for (int r = 0; r < traces.runs; ++r)
    for (int i = 0; i < traces.subsystems(); ++i) {
      const auto& t = traces.traces[r][i];
      for (std::size_t k = 0; k < t.x.size(); ++k) {
        if (k < t.u.size())
          std::snprintf(buf, sizeof buf, "%d,%zu,%d,%.17g,%.17g,%d\n", r + 1, k + 1, i + 1, t.x[k], t.u[k],
                        static_cast<int>(t.gamma[k]));
        else
          std::snprintf(buf, sizeof buf, "%d,%zu,%d,%.17g,,\n", r + 1, k + 1, i + 1, t.x[k]);
        out << buf;
      }
    }
}

void write_diagnostic_csv(const std::vector<StabilityDiagnostic>& diags, std::ostream& out) {
  char buf[96];
  out << "frame,subsystem,mean_square\n";
  for (std::size_t i = 0; i < diags.size(); ++i)
    for (std::size_t k = 0; k < diags[i].mean_square.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", k + 1, i + 1, diags[i].mean_square[k]);
      out << buf;
    }
}

}  // namespace wncs
