#pragma once

// Experiment configuration: a flat "key = value" text format. Lines starting
// with '#' and blank lines are ignored; omitted keys keep the defaults below.
// docs/config_format.md lists every key.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aoirelay/agent.hpp"
#include "aoirelay/env.hpp"

namespace aoirelay {

enum class SweepAxis { kNone, kRelays, kEnergyMax };

std::string_view to_string(SweepAxis axis);

// Thrown for unknown keys, malformed values and constraint violations. The
// message starts with the offending key.
struct ConfigError : std::invalid_argument {
  ConfigError(const std::string& key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key(key) {}
  std::string key;
};

struct ExperimentConfig {
  // Radio settings are kept as SNR and power ratio; sim() derives the powers.
  double snr_db = 70.0;  // P_S / N0
  double power_ratio = 1000.0;  // P_S / P_R
  SimParams sim_base;  // everything except source_power / relay_power
  TrainConfig train;
  std::uint64_t train_seed = 1;

  std::vector<std::string> policies{"ddqn", "max-link", "greedy", "dbrs-variant", "random"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  SweepAxis sweep = SweepAxis::kNone;
  std::vector<int> sweep_values;
  std::int64_t eval_slots = 100'000;
  bool mask_infeasible = false;
  bool auto_train = true;
  std::string checkpoint_dir = "checkpoints";

  SimParams sim() const;
  // SimParams at one sweep point.
  SimParams sim_at(int sweep_value) const;
  // The sweep points, or {current value} without a sweep.
  std::vector<int> sweep_points() const;

  // Throws ConfigError.
  void validate() const;
  // Canonical text form; load(serialize(c)) == c.
  std::string serialize() const;

  bool operator==(const ExperimentConfig& other) const { return serialize() == other.serialize(); }
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace aoirelay
