#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wncs/capacity_mdp.hpp"
#include "wncs/model.hpp"

namespace wncs {

// One sub-system's realization. x holds x_1 .. x_{K+1}; u and gamma hold the
// per-period control and delivery indicator for periods 1 .. K.
struct SubsystemTrace {
  std::vector<double> x;
  std::vector<double> u;
  std::vector<std::uint8_t> gamma;
};

struct TraceEnsemble {
  std::uint64_t seed = 0;
  int runs = 0;
  int big_frames = 0;                 // simulated (big) frames
  std::vector<int> periods;           // h_i
  std::vector<int> repetitions;       // periods of sub-system i per big frame
  std::vector<DiscretePlant> plants;
  std::vector<std::uint64_t> run_keys;
  std::vector<std::vector<SubsystemTrace>> traces;  // [run][subsystem]

  int subsystems() const { return static_cast<int>(periods.size()); }
  int periods_of(int i) const { return big_frames * repetitions[i]; }
};

struct SimulationOptions {
  std::vector<double> initial_state;  // x_1 per sub-system; defaults to 1
  bool parallel = true;               // OpenMP over runs; bit-identical to serial
  int threads = 0;
};

// Slot-level co-simulation. `frames` counts (big) frames of the design's
// horizon, so sub-system i completes frames * H / h_i periods.
TraceEnsemble simulate(const SystemConfig& config, const CoDesign& design, int frames, int runs,
                       std::uint64_t seed, SimulationOptions opts = {});

struct DropoutEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  long samples = 0;
  bool inconclusive = false;
};

// [subsystem][period index within the big frame]
std::vector<std::vector<DropoutEstimate>> empirical_dropout(const TraceEnsemble& traces,
                                                            long min_samples = 100);

// Pooled lag-1 autocorrelation of gamma for one sub-system across all runs.
double lag1_autocorrelation(const TraceEnsemble& traces, int subsystem);

enum class DecayVerdict { Decaying, NotDecaying, Inconclusive };
const char* to_string(DecayVerdict v);

struct StabilityDiagnostic {
  std::vector<double> mean_square;  // per frame k = 1 .. K+1
  double slope = 0.0;               // d log E[x^2] / dk over the last half
  double slope_std_error = 0.0;
  DecayVerdict verdict = DecayVerdict::Inconclusive;
  double confidence = 0.99;
  std::string note;
};

inline constexpr double kLogFloor = 1e-300;

std::vector<StabilityDiagnostic> stability_diagnostic(const TraceEnsemble& traces,
                                                      double confidence = 0.99);

// Cross-run mean of x_k^2 per frame, pairwise summation over runs.
std::vector<double> mean_square(const TraceEnsemble& traces, int subsystem);

// run,frame,subsystem,x,u,gamma  (run, frame and subsystem 1-based; the final
// state row of each trajectory leaves u and gamma empty)
void write_trace_csv(const TraceEnsemble& traces, std::ostream& out);
// frame,subsystem,mean_square
void write_diagnostic_csv(const std::vector<StabilityDiagnostic>& diags, std::ostream& out);

}  // namespace wncs
