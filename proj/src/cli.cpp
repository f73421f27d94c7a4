#include "wncs/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include "wncs/capacity_idle.hpp"
#include "wncs/capacity_mdp.hpp"
#include "wncs/simulator.hpp"

namespace wncs::cli {

namespace {

struct Options {
  std::string config_path;
  std::string out_path;
  std::string diag_path;
  std::uint64_t seed = 1;
  int frames = 200;
  int runs = 1000;
  std::string h_range;
  std::string p_grid;
  std::optional<double> margin;
  double tol = 1e-4;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

SystemConfig load(const Options& o) {
  SystemConfig cfg = load_config(o.config_path);
  if (o.margin) cfg.feasibility_margin = *o.margin;
  return validate(std::move(cfg));
}

// Writes to the --out path when given, else to `fallback`.
template <class Fn>
void emit(const std::string& path, std::ostream& fallback, Fn&& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::InvalidConfig, "cannot write output file " + path);
  write(f);
}

nlohmann::ordered_json verdict_json(const StabilityVerdict& v) {
  nlohmann::ordered_json j;
  j["stabilizable"] = v.stabilizable;
  j["slack"] = v.slack;
  j["margin"] = v.margin;
  j["binding_subset"] = subset_label(v.binding_subset);
  j["binding_constraint"] = v.binding_constraint;
  return j;
}

void print_verdict(const StabilityVerdict& v, std::ostream& out) {
  out << "verdict: " << (v.stabilizable ? "stabilizable" : "not stabilizable") << '\n'
      << "slack: " << fmt("%.12g", v.slack) << " (margin " << fmt("%.3g", v.margin) << ")\n"
      << "binding: " << v.binding_constraint << '\n';
}

int cmd_check(const Options& o, std::ostream& out) {
  const SystemConfig cfg = load(o);
  StabilityVerdict v;
  if (cfg.homogeneous()) {
    v = check_stability_general(cfg);
  } else {
    v = synthesize(cfg).verdict;
    out << "heterogeneous periods: testing the sufficient occupancy-measure condition\n";
  }
  print_verdict(v, out);
  if (!o.out_path.empty())
    emit(o.out_path, out, [&](std::ostream& f) { f << verdict_json(v).dump(2) << '\n'; });
  return kOk;
}

void print_design(const CoDesign& d, std::ostream& out) {
  for (std::size_t i = 0; i < d.subsystems.size(); ++i) {
    const auto& s = d.subsystems[i];
    out << "subsystem " << i + 1 << ": h=" << s.period << " q_max=" << fmt("%.9g", s.q_max)
        << " design_q=" << fmt("%.9g", s.design_q) << " P=" << fmt("%.9g", s.dare.p_val)
        << " K=" << fmt("%.9g", s.dare.gain()) << " delivery=";
    const auto& w = d.performance.window_delivery[i];
    for (std::size_t j = 0; j < w.size(); ++j) out << (j ? "/" : "") << fmt("%.9g", w[j]);
    out << " target=" << fmt("%.9g", s.target) << '\n';
  }
}

int cmd_synthesize(const Options& o, std::ostream& out) {
  const SystemConfig cfg = load(o);
  const SynthesisResult res = synthesize(cfg);
  out << "outcome: " << to_string(res.outcome) << '\n';
  print_verdict(res.verdict, out);
  if (res.outcome != SynthesisOutcome::Synthesized) return kNotStabilizable;
  print_design(*res.design, out);
  if (!o.out_path.empty())
    emit(o.out_path, out, [&](std::ostream& f) { f << policy_to_json(res.design->policy) << '\n'; });
  return kOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const SystemConfig cfg = load(o);
  const SynthesisResult res = synthesize(cfg);
  if (res.outcome != SynthesisOutcome::Synthesized) {
    out << "outcome: " << to_string(res.outcome) << '\n';
    print_verdict(res.verdict, out);
    return kNotStabilizable;
  }
  const TraceEnsemble ens = simulate(cfg, *res.design, o.frames, o.runs, o.seed);
  const auto diags = stability_diagnostic(ens, 0.99);
  const auto drops = empirical_dropout(ens);
  for (std::size_t i = 0; i < diags.size(); ++i) {
    out << "subsystem " << i + 1 << ": " << to_string(diags[i].verdict)
        << " slope=" << fmt("%.6g", diags[i].slope) << " se=" << fmt("%.3g", diags[i].slope_std_error)
        << " dropout=";
    for (std::size_t j = 0; j < drops[i].size(); ++j)
      out << (j ? "/" : "") << fmt("%.5f", drops[i][j].estimate) << "+-"
          << fmt("%.5f", drops[i][j].std_error);
    if (!diags[i].note.empty()) out << " (" << diags[i].note << ")";
    out << '\n';
  }
  if (!o.out_path.empty()) emit(o.out_path, out, [&](std::ostream& f) { write_trace_csv(ens, f); });
  if (!o.diag_path.empty()) emit(o.diag_path, out, [&](std::ostream& f) { write_diagnostic_csv(diags, f); });
  return kOk;
}

struct SweepRow {
  int h;
  std::optional<double> p;
  StabilityVerdict verdict;
};

int cmd_sweep(const Options& o, std::ostream& out, bool need_h, bool need_p) {
  const SystemConfig base = load(o);
  if (need_h && o.h_range.empty()) throw Error(ErrorKind::InvalidConfig, "--h-range is required");
  if (need_p && o.p_grid.empty()) throw Error(ErrorKind::InvalidConfig, "--p-grid is required");
  const std::vector<int> hs = o.h_range.empty() ? std::vector<int>{base.period()} : parse_h_range(o.h_range);
  std::vector<std::optional<double>> ps;
  if (o.p_grid.empty()) ps.emplace_back();
  else
    for (double p : parse_p_grid(o.p_grid)) ps.emplace_back(p);

  std::vector<SweepRow> rows;
  for (int h : hs)
    for (const auto& p : ps) rows.push_back({h, p, {}});

  const auto count = static_cast<std::int64_t>(rows.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t k = 0; k < count; ++k) {
    SystemConfig cfg = base;
    auto& row = rows[static_cast<std::size_t>(k)];
    std::fill(cfg.sampling_periods.begin(), cfg.sampling_periods.end(), row.h);
    if (row.p) std::fill(cfg.channel.begin(), cfg.channel.end(), *row.p);
    row.verdict = check_stability_general(cfg);
  }

  std::optional<double> uniform_p;
  if (std::all_of(base.channel.begin(), base.channel.end(), [&](double p) { return p == base.channel[0]; }))
    uniform_p = base.channel[0];

  emit(o.out_path, out, [&](std::ostream& f) {
    f << "h,p,stabilizable,slack,binding_subset\n";
    for (const auto& r : rows) {
      const auto p = r.p ? r.p : uniform_p;
      f << r.h << ',' << (p ? fmt("%.10g", *p) : "") << ',' << (r.verdict.stabilizable ? 1 : 0) << ','
        << fmt("%.12g", r.verdict.slack) << ',' << subset_label(r.verdict.binding_subset) << '\n';
    }
  });
  return kOk;
}

int cmd_pmin(const Options& o, std::ostream& out) {
  const SystemConfig cfg = load(o);
  const double a = cfg.plants.front().a;
  for (const auto& p : cfg.plants)
    if (p.a != a) throw Error(ErrorKind::WrongSpecialization, "pmin requires identical growth rates a_i");
  const int n = static_cast<int>(cfg.size());
  const auto r = min_channel_quality_symmetric(n, a, cfg.period(), cfg.slot_length, o.tol,
                                               cfg.feasibility_margin);
  emit(o.out_path, out, [&](std::ostream& f) {
    if (!r.achievable) {
      f << "not achievable: unstable even with p = 1\n";
      return;
    }
    f << fmt("%.6f", r.p_min) << '\n';
  });
  if (!o.out_path.empty())
    out << (r.achievable ? "p_min=" + fmt("%.6f", r.p_min) : std::string("not achievable")) << '\n';
  return kOk;
}

int cmd_hmin(const Options& o, std::ostream& out) {
  const SystemConfig cfg = load(o);
  const int h = min_sampling_period_perfect(cfg);
  emit(o.out_path, out, [&](std::ostream& f) { f << h << '\n'; });
  if (!o.out_path.empty()) out << "h_min=" << h << '\n';
  return kOk;
}

}  // namespace

std::vector<int> parse_h_range(const std::string& text) {
  const auto colon = text.find(':');
  int lo = 0, hi = 0;
  try {
    if (colon == std::string::npos) {
      lo = hi = std::stoi(text);
    } else {
      lo = std::stoi(text.substr(0, colon));
      hi = std::stoi(text.substr(colon + 1));
    }
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidConfig, "malformed --h-range '" + text + "' (expected LO:HI)");
  }
  if (lo < 1 || hi < lo) throw Error(ErrorKind::InvalidConfig, "--h-range must satisfy 1 <= LO <= HI");
  std::vector<int> out;
  for (int h = lo; h <= hi; ++h) out.push_back(h);
  return out;
}

std::vector<double> parse_p_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto c1 = item.find(':');
      if (c1 == std::string::npos) {
        out.push_back(std::stod(item));
        continue;
      }
      const auto c2 = item.find(':', c1 + 1);
      if (c2 == std::string::npos) throw std::invalid_argument("range");
      const double lo = std::stod(item.substr(0, c1));
      const double step = std::stod(item.substr(c1 + 1, c2 - c1 - 1));
      const double hi = std::stod(item.substr(c2 + 1));
      if (!(step > 0.0) || hi < lo) throw std::invalid_argument("range");
      const long count = std::lround(std::floor((hi - lo) / step + 1e-9));
      for (long k = 0; k <= count; ++k) out.push_back(lo + static_cast<double>(k) * step);
    }
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidConfig, "malformed --p-grid '" + text + "'");
  }
  if (out.empty()) throw Error(ErrorKind::InvalidConfig, "--p-grid is empty");
  for (double p : out)
    if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidConfig, "--p-grid values must lie in (0,1]");
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stabilizability analysis and co-design for control loops sharing a lossy wireless channel",
               "wncs"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "System configuration (JSON)")->required();
    sub->add_option("--out", o.out_path, "Output file");
    sub->add_option("--margin", o.margin, "Override feasibility_margin");
  };
  auto* check = app.add_subcommand("check", "Decide stabilizability of the configuration");
  auto* synth = app.add_subcommand("synthesize", "Build the scheduling policy and controllers");
  auto* sim = app.add_subcommand("simulate", "Synthesize, then Monte-Carlo simulate the closed loop");
  auto* sweep_h = app.add_subcommand("sweep-h", "Verdict table over sampling periods");
  auto* sweep_p = app.add_subcommand("sweep-p", "Verdict table over channel qualities");
  auto* pmin = app.add_subcommand("pmin", "Minimum common channel quality (identical sub-systems)");
  auto* hmin = app.add_subcommand("hmin", "Minimum sampling period (perfect channel)");
  for (auto* s : {check, synth, sim, sweep_h, sweep_p, pmin, hmin}) common(s);

  sim->add_option("--seed", o.seed, "Master seed");
  sim->add_option("--frames", o.frames, "Frames K")->check(CLI::NonNegativeNumber);
  sim->add_option("--runs", o.runs, "Runs M")->check(CLI::NonNegativeNumber);
  sim->add_option("--diag-out", o.diag_path, "Mean-square diagnostic CSV");
  for (auto* s : {sweep_h, sweep_p}) {
    s->add_option("--h-range", o.h_range, "Sampling periods LO:HI");
    s->add_option("--p-grid", o.p_grid, "Channel qualities p1,p2,... or LO:STEP:HI");
  }
  pmin->add_option("--tol", o.tol, "Bisection tolerance on p")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "wncs: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*check) return cmd_check(o, out);
    if (*synth) return cmd_synthesize(o, out);
    if (*sim) return cmd_simulate(o, out);
    if (*sweep_h) return cmd_sweep(o, out, true, false);
    if (*sweep_p) return cmd_sweep(o, out, false, true);
    if (*pmin) return cmd_pmin(o, out);
    if (*hmin) return cmd_hmin(o, out);
  } catch (const Error& e) {
    err << "wncs: " << to_string(e.kind()) << ": " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::InvalidConfig:
      case ErrorKind::WrongSpecialization:
      case ErrorKind::TooLarge:
      case ErrorKind::UnrepresentablePlant:
        return kInvalidConfig;
      default:
        return kInternalFailure;
    }
  } catch (const std::exception& e) {
    err << "wncs: internal failure: " << e.what() << '\n';
    return kInternalFailure;
  }
  return kUsage;
}

}  // namespace wncs::cli
