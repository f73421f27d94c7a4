#include "wncs/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace wncs {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::UnrepresentablePlant: return "unrepresentable-plant";
    case ErrorKind::NoStabilizingSolution: return "no-stabilizing-solution";
    case ErrorKind::NumericFailure: return "numeric-failure";
    case ErrorKind::TooLarge: return "too-large";
    case ErrorKind::WrongSpecialization: return "wrong-specialization";
    case ErrorKind::SolverFailure: return "solver-failure";
  }
  return "unknown";
}

bool SystemConfig::homogeneous() const {
  for (int h : sampling_periods)
    if (h != sampling_periods.front()) return false;
  return true;
}

int SystemConfig::period() const {
  if (sampling_periods.empty() || !homogeneous())
    throw Error(ErrorKind::WrongSpecialization,
                "analysis requires identical sampling periods");
  return sampling_periods.front();
}

DiscretePlant discretize(const ContinuousPlant& plant, int h, double delta) {
  if (h < 1) throw Error(ErrorKind::InvalidConfig, "sampling period must be >= 1");
  if (!(delta > 0.0)) throw Error(ErrorKind::InvalidConfig, "slot length must be > 0");
  const double span = static_cast<double>(h) * delta;
  const double x = plant.a * span;
  DiscretePlant out;
  out.a_bar = std::exp(x);
  // integral_0^{h delta} e^{a tau} b dtau; expm1 keeps the small-a regime exact.
  out.b_bar = plant.a == 0.0 ? span * plant.b : std::expm1(x) / plant.a * plant.b;
  if (!std::isfinite(out.a_bar) || !std::isfinite(out.b_bar))
    throw Error(ErrorKind::UnrepresentablePlant,
                "exp(a*h*delta) overflows for a=" + std::to_string(plant.a) +
                    ", h=" + std::to_string(h));
  return out;
}

SystemConfig validate(SystemConfig config) {
  std::vector<std::string> issues;
  const std::size_t n = config.plants.size();
  if (n == 0) issues.emplace_back("plants: at least one sub-system is required");
  if (config.channel.size() != n)
    issues.emplace_back("channel: length " + std::to_string(config.channel.size()) +
                        " differs from plants length " + std::to_string(n));
  if (config.sampling_periods.size() != n)
    issues.emplace_back("sampling_periods: length " +
                        std::to_string(config.sampling_periods.size()) +
                        " differs from plants length " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = config.plants[i];
    const std::string path = "plants[" + std::to_string(i) + "]";
    if (!std::isfinite(p.a) || p.a < 0.0) issues.push_back(path + ".a: requires a >= 0");
    if (!std::isfinite(p.b) || p.b == 0.0) issues.push_back(path + ".b: requires b != 0");
  }
  for (std::size_t i = 0; i < config.channel.size(); ++i) {
    const double p = config.channel[i];
    if (!(p > 0.0 && p <= 1.0))
      issues.push_back("channel[" + std::to_string(i) + "]: p_i in (0,1] violated");
  }
  for (std::size_t i = 0; i < config.sampling_periods.size(); ++i)
    if (config.sampling_periods[i] < 1)
      issues.push_back("sampling_periods[" + std::to_string(i) + "]: requires h_i >= 1");
  if (!(config.slot_length > 0.0) || !std::isfinite(config.slot_length))
    issues.emplace_back("slot_length: requires slot_length > 0");
  if (!(config.feasibility_margin > 0.0) || !std::isfinite(config.feasibility_margin))
    issues.emplace_back("feasibility_margin: requires feasibility_margin > 0");

  if (!issues.empty()) {
    std::string msg = "invalid config:";
    for (const auto& s : issues) msg += "\n  " + s;
    throw Error(ErrorKind::InvalidConfig, msg);
  }
  return config;
}

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) known = known || it.key() == key;
    if (!known)
      throw Error(ErrorKind::InvalidConfig, where + ": unknown field '" + it.key() + "'");
  }
}

}  // namespace

SystemConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::InvalidConfig, "config must be a JSON object");
  reject_unknown(doc,
                 {"plants", "channel", "sampling_periods", "slot_length", "feasibility_margin"},
                 "config");

  SystemConfig cfg;
  try {
    for (std::size_t i = 0; i < doc.at("plants").size(); ++i) {
      const json& p = doc.at("plants").at(i);
      if (!p.is_object())
        throw Error(ErrorKind::InvalidConfig, "plants[" + std::to_string(i) + "] must be an object");
      reject_unknown(p, {"a", "b"}, "plants[" + std::to_string(i) + "]");
      cfg.plants.push_back({p.at("a").get<double>(), p.at("b").get<double>()});
    }
    cfg.channel = doc.at("channel").get<std::vector<double>>();
    cfg.sampling_periods = doc.at("sampling_periods").get<std::vector<int>>();
    cfg.slot_length = doc.at("slot_length").get<double>();
    if (doc.contains("feasibility_margin"))
      cfg.feasibility_margin = doc.at("feasibility_margin").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config: ") + e.what());
  }
  return validate(std::move(cfg));
}

SystemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const SystemConfig& config) {
  json doc;
  doc["plants"] = json::array();
  for (const auto& p : config.plants) doc["plants"].push_back({{"a", p.a}, {"b", p.b}});
  doc["channel"] = config.channel;
  doc["sampling_periods"] = config.sampling_periods;
  doc["slot_length"] = config.slot_length;
  doc["feasibility_margin"] = config.feasibility_margin;
  return doc.dump(2);
}

std::string subset_label(const std::vector<int>& subset) {
  std::string out;
  for (int i : subset) out += std::to_string(i);
  return out;
}

}  // namespace wncs
