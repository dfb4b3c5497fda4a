#pragma once

#include <cstdint>
#include <functional>

#include "aoirelay/env.hpp"
#include "aoirelay/rng.hpp"

namespace aoirelay {

struct RunStats {
  std::int64_t slots = 0;
  double mean_aoi = 0.0;
  double mean_aoi_se = 0.0;  // batch-means standard error within the run
  double reward_sum = 0.0;
  std::int64_t generated = 0;
  std::int64_t delivered = 0;
  std::int64_t relay_discards = 0;
  std::int64_t source_drops = 0;
  std::int64_t stale_drops = 0;
  std::int64_t resident_at_end = 0;
  std::int64_t infeasible = 0;  // agent/policy choices rejected by check_feasible
  std::int64_t idle = 0;

  double rate(std::int64_t count) const {
    return generated > 0 ? static_cast<double>(count) / static_cast<double>(generated) : 0.0;
  }
};

// Chooses a decision for the current slot; the stream is the controller's own.
using Controller = std::function<Decision(const NetworkState&, Rng&)>;

// Runs one continuous trajectory of `slots` slots. The environment and the
// controller draw from independent streams derived from `seed`.
RunStats simulate(const SimParams& params, const Controller& controller,
                  std::int64_t slots, std::uint64_t seed);

}  // namespace aoirelay
