#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "wncs/error.hpp"

namespace wncs {

// Continuous-time scalar plant  dx/dt = a x + b u.
struct ContinuousPlant {
  double a = 0.0;  // growth rate, 1/s
  double b = 1.0;  // input gain
};

inline constexpr double kDefaultMargin = 1e-6;

struct SystemConfig {
  std::vector<ContinuousPlant> plants;
  std::vector<double> channel;        // success probability per sub-system
  std::vector<int> sampling_periods;  // slots
  double slot_length = 0.0;           // seconds
  double feasibility_margin = kDefaultMargin;

  std::size_t size() const { return plants.size(); }
  bool homogeneous() const;
  // Common period; throws WrongSpecialization when periods differ.
  int period() const;
};

// Lifted per-frame pair of x_{k+1} = a_bar x_k + gamma_{k-1} b_bar u_{k-1}.
struct DiscretePlant {
  double a_bar = 1.0;
  double b_bar = 1.0;
};

struct StabilityVerdict {
  bool stabilizable = false;
  // Human-readable form of the tightest inequality.
  std::string binding_constraint;
  // 1-based sub-system indices of the tightest subset (empty for closed forms
  // that are not tied to a subset).
  std::vector<int> binding_subset;
  // Signed distance of the tightest inequality to its boundary. The verdict is
  // stabilizable iff slack > margin.
  double slack = 0.0;
  double margin = kDefaultMargin;
};

DiscretePlant discretize(const ContinuousPlant& plant, int h, double delta);

// Returns the config unchanged, or throws InvalidConfig listing every
// violated invariant with its field path.
SystemConfig validate(SystemConfig config);

SystemConfig parse_config(const std::string& json_text);
SystemConfig load_config(const std::string& path);
std::string config_to_json(const SystemConfig& config);

// "13" for {1,3}.
std::string subset_label(const std::vector<int>& subset);

}  // namespace wncs
