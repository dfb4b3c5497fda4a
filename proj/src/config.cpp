#include "aoirelay/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "aoirelay/policies.hpp"

namespace aoirelay {

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kNone: return "none";
    case SweepAxis::kRelays: return "relays";
    case SweepAxis::kEnergyMax: return "energy_max";
  }
  return "?";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x)) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  return x;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int x{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>) {
      s += fmt(v[i]);
    } else if constexpr (std::is_same_v<T, std::string>) {
      s += v[i];
    } else {
      s += std::to_string(v[i]);
    }
  }
  return s;
}

// "a,b,c" or "a-b" (inclusive range) of unsigned integers.
template <typename Int>
std::vector<Int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<Int> out;
  for (const auto& item : split_list(v)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(to_int<Int>(key, item));
      continue;
    }
    const Int lo = to_int<Int>(key, trim(item.substr(0, dash)));
    const Int hi = to_int<Int>(key, trim(item.substr(dash + 1)));
    if (hi < lo) throw ConfigError(key, "empty range '" + item + "'");
    for (Int i = lo; i <= hi; ++i) out.push_back(i);
  }
  return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  return out;
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      // network
      {"relays", [](C& c, const std::string& v) { c.sim_base.num_relays = to_int<std::size_t>("relays", v); },
       [](const C& c) { return std::to_string(c.sim_base.num_relays); }},
      {"lambda", [](C& c, const std::string& v) { c.sim_base.arrival_prob = to_double("lambda", v); },
       [](const C& c) { return fmt(c.sim_base.arrival_prob); }},
      {"aoi_max", [](C& c, const std::string& v) { c.sim_base.aoi_max = to_int<int>("aoi_max", v); },
       [](const C& c) { return std::to_string(c.sim_base.aoi_max); }},
      {"energy_max", [](C& c, const std::string& v) { c.sim_base.energy_buffer_max = to_int<int>("energy_max", v); },
       [](const C& c) { return std::to_string(c.sim_base.energy_buffer_max); }},
      {"initial_energy",
       [](C& c, const std::string& v) { c.sim_base.initial_energy_intervals = to_int<int>("initial_energy", v); },
       [](const C& c) { return std::to_string(c.sim_base.initial_energy_intervals); }},
      {"eta", [](C& c, const std::string& v) { c.sim_base.conversion_efficiency = to_double("eta", v); },
       [](const C& c) { return fmt(c.sim_base.conversion_efficiency); }},
      {"snr_db", [](C& c, const std::string& v) { c.snr_db = to_double("snr_db", v); },
       [](const C& c) { return fmt(c.snr_db); }},
      {"power_ratio", [](C& c, const std::string& v) { c.power_ratio = to_double("power_ratio", v); },
       [](const C& c) { return fmt(c.power_ratio); }},
      {"noise_power", [](C& c, const std::string& v) { c.sim_base.noise_power = to_double("noise_power", v); },
       [](const C& c) { return fmt(c.sim_base.noise_power); }},
      {"rate", [](C& c, const std::string& v) { c.sim_base.target_rate = to_double("rate", v); },
       [](const C& c) { return fmt(c.sim_base.target_rate); }},
      {"snr_threshold",
       [](C& c, const std::string& v) {
         if (v == "auto") {
           c.sim_base.snr_threshold_override.reset();
         } else {
           c.sim_base.snr_threshold_override = to_double("snr_threshold", v);
         }
       },
       [](const C& c) {
         return c.sim_base.snr_threshold_override ? fmt(*c.sim_base.snr_threshold_override) : std::string("auto");
       }},
      {"slot_length", [](C& c, const std::string& v) { c.sim_base.slot_length = to_double("slot_length", v); },
       [](const C& c) { return fmt(c.sim_base.slot_length); }},
      {"distance", [](C& c, const std::string& v) { c.sim_base.link_distance = to_double("distance", v); },
       [](const C& c) { return fmt(c.sim_base.link_distance); }},
      {"distance_h",
       [](C& c, const std::string& v) { c.sim_base.source_relay_distance = to_double_list("distance_h", v); },
       [](const C& c) { return join(c.sim_base.source_relay_distance); }},
      {"distance_g",
       [](C& c, const std::string& v) { c.sim_base.relay_dest_distance = to_double_list("distance_g", v); },
       [](const C& c) { return join(c.sim_base.relay_dest_distance); }},
      {"penalty",
       [](C& c, const std::string& v) {
         if (v == "auto") {
           c.sim_base.penalty_override.reset();
         } else {
           c.sim_base.penalty_override = to_double("penalty", v);
         }
       },
       [](const C& c) {
         return c.sim_base.penalty_override ? fmt(*c.sim_base.penalty_override) : std::string("auto");
       }},
      {"horizon", [](C& c, const std::string& v) { c.sim_base.horizon = to_int<int>("horizon", v); },
       [](const C& c) { return std::to_string(c.sim_base.horizon); }},
      // training
      {"episodes", [](C& c, const std::string& v) { c.train.episodes = to_int<int>("episodes", v); },
       [](const C& c) { return std::to_string(c.train.episodes); }},
      {"steps", [](C& c, const std::string& v) { c.train.steps_per_episode = to_int<int>("steps", v); },
       [](const C& c) { return std::to_string(c.train.steps_per_episode); }},
      {"discount", [](C& c, const std::string& v) { c.train.discount = to_double("discount", v); },
       [](const C& c) { return fmt(c.train.discount); }},
      {"step_size", [](C& c, const std::string& v) { c.train.step_size = to_double("step_size", v); },
       [](const C& c) { return fmt(c.train.step_size); }},
      {"optimizer",
       [](C& c, const std::string& v) {
         if (v == "sgd") {
           c.train.optimizer = OptimizerKind::kSgd;
         } else if (v == "adam") {
           c.train.optimizer = OptimizerKind::kAdam;
         } else {
           throw ConfigError("optimizer", "expected sgd or adam, got '" + v + "'");
         }
       },
       [](const C& c) { return std::string(c.train.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"); }},
      {"target_sync", [](C& c, const std::string& v) { c.train.target_sync = to_int<int>("target_sync", v); },
       [](const C& c) { return std::to_string(c.train.target_sync); }},
      {"epsilon_start", [](C& c, const std::string& v) { c.train.epsilon_start = to_double("epsilon_start", v); },
       [](const C& c) { return fmt(c.train.epsilon_start); }},
      {"epsilon_end", [](C& c, const std::string& v) { c.train.epsilon_end = to_double("epsilon_end", v); },
       [](const C& c) { return fmt(c.train.epsilon_end); }},
      {"epsilon_decay",
       [](C& c, const std::string& v) { c.train.epsilon_decay_fraction = to_double("epsilon_decay", v); },
       [](const C& c) { return fmt(c.train.epsilon_decay_fraction); }},
      {"per_alpha", [](C& c, const std::string& v) { c.train.per_alpha = to_double("per_alpha", v); },
       [](const C& c) { return fmt(c.train.per_alpha); }},
      {"per_beta", [](C& c, const std::string& v) { c.train.per_beta = to_double("per_beta", v); },
       [](const C& c) { return fmt(c.train.per_beta); }},
      {"per_zeta", [](C& c, const std::string& v) { c.train.per_zeta = to_double("per_zeta", v); },
       [](const C& c) { return fmt(c.train.per_zeta); }},
      {"replay_capacity",
       [](C& c, const std::string& v) { c.train.replay_capacity = to_int<std::size_t>("replay_capacity", v); },
       [](const C& c) { return std::to_string(c.train.replay_capacity); }},
      {"batch_size", [](C& c, const std::string& v) { c.train.batch_size = to_int<std::size_t>("batch_size", v); },
       [](const C& c) { return std::to_string(c.train.batch_size); }},
      {"hidden", [](C& c, const std::string& v) { c.train.hidden_dims = to_int_list<std::size_t>("hidden", v); },
       [](const C& c) { return join(c.train.hidden_dims); }},
      {"train_seed", [](C& c, const std::string& v) { c.train_seed = to_int<std::uint64_t>("train_seed", v); },
       [](const C& c) { return std::to_string(c.train_seed); }},
      // experiment
      {"policies", [](C& c, const std::string& v) { c.policies = split_list(v); },
       [](const C& c) { return join(c.policies); }},
      {"seeds", [](C& c, const std::string& v) { c.seeds = to_int_list<std::uint64_t>("seeds", v); },
       [](const C& c) { return join(c.seeds); }},
      {"sweep",
       [](C& c, const std::string& v) {
         if (v == "none") {
           c.sweep = SweepAxis::kNone;
         } else if (v == "relays") {
           c.sweep = SweepAxis::kRelays;
         } else if (v == "energy_max") {
           c.sweep = SweepAxis::kEnergyMax;
         } else {
           throw ConfigError("sweep", "expected none, relays or energy_max, got '" + v + "'");
         }
       },
       [](const C& c) { return std::string(to_string(c.sweep)); }},
      {"sweep_values", [](C& c, const std::string& v) { c.sweep_values = to_int_list<int>("sweep_values", v); },
       [](const C& c) { return join(c.sweep_values); }},
      {"eval_slots", [](C& c, const std::string& v) { c.eval_slots = to_int<std::int64_t>("eval_slots", v); },
       [](const C& c) { return std::to_string(c.eval_slots); }},
      {"mask_infeasible", [](C& c, const std::string& v) { c.mask_infeasible = to_bool("mask_infeasible", v); },
       [](const C& c) { return std::string(c.mask_infeasible ? "true" : "false"); }},
      {"auto_train", [](C& c, const std::string& v) { c.auto_train = to_bool("auto_train", v); },
       [](const C& c) { return std::string(c.auto_train ? "true" : "false"); }},
      {"checkpoint_dir", [](C& c, const std::string& v) { c.checkpoint_dir = v; },
       [](const C& c) { return c.checkpoint_dir; }},
  };
  return table;
}

}  // namespace

SimParams ExperimentConfig::sim() const {
  SimParams p = sim_base;
  p.source_power = p.noise_power * std::pow(10.0, snr_db / 10.0);
  p.relay_power = p.source_power / power_ratio;
  return p;
}

SimParams ExperimentConfig::sim_at(int v) const {
  SimParams p = sim();
  if (sweep == SweepAxis::kRelays) {
    p.num_relays = static_cast<std::size_t>(v);
  } else if (sweep == SweepAxis::kEnergyMax) {
    p.energy_buffer_max = v;
    p.initial_energy_intervals = std::min(p.initial_energy_intervals, v);
  }
  return p;
}

std::vector<int> ExperimentConfig::sweep_points() const {
  // Without a sweep there is a single point whose value sim_at ignores.
  if (sweep == SweepAxis::kNone) return {0};
  return sweep_values;
}

void ExperimentConfig::validate() const {
  if (!std::isfinite(snr_db)) throw ConfigError("snr_db", "must be finite");
  if (!(power_ratio > 0.0)) throw ConfigError("power_ratio", "must be > 0");
  try {
    sim().validate();
    train.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    const std::string key = colon == std::string::npos ? "config" : msg.substr(0, colon);
    const std::string rest = colon == std::string::npos ? msg : trim(msg.substr(colon + 1));
    throw ConfigError(key, rest);
  }
  if (!sim().source_relay_distance.empty() && sweep == SweepAxis::kRelays) {
    throw ConfigError("distance_h", "per-relay distances cannot be combined with a relay sweep");
  }
  if (!sim().relay_dest_distance.empty() && sweep == SweepAxis::kRelays) {
    throw ConfigError("distance_g", "per-relay distances cannot be combined with a relay sweep");
  }
  if (policies.empty()) throw ConfigError("policies", "must name at least one policy");
  for (const auto& p : policies) {
    if (p != "ddqn" && !parse_policy_kind(p)) throw ConfigError("policies", "unknown policy '" + p + "'");
  }
  if (std::set<std::string>(policies.begin(), policies.end()).size() != policies.size()) {
    throw ConfigError("policies", "duplicate entry");
  }
  if (seeds.empty()) throw ConfigError("seeds", "must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds", "duplicate entry");
  }
  if (sweep != SweepAxis::kNone) {
    if (sweep_values.empty()) throw ConfigError("sweep_values", "must not be empty when sweeping");
    for (int v : sweep_values) {
      if (v < 1) throw ConfigError("sweep_values", "must be positive integers");
    }
    if (std::set<int>(sweep_values.begin(), sweep_values.end()).size() != sweep_values.size()) {
      throw ConfigError("sweep_values", "duplicate entry");
    }
  }
  if (eval_slots < 1) throw ConfigError("eval_slots", "must be >= 1");
}

std::string ExperimentConfig::serialize() const {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(*this);
    out += '\n';
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.key; });
    if (it == table.end()) throw ConfigError(key, "unknown key");
    if (!seen.insert(key).second) throw ConfigError(key, "given more than once");
    it->set(c, value);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace aoirelay
