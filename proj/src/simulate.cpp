#include "aoirelay/simulate.hpp"

#include <cmath>
#include <vector>

namespace aoirelay {

namespace {
constexpr std::int64_t kBatches = 50;
}

RunStats simulate(const SimParams& params, const Controller& controller,
                  std::int64_t slots, std::uint64_t seed) {
  params.validate();
  Rng env_rng = seed_stream(seed, "env");
  Rng policy_rng = seed_stream(seed, "policy");
  NetworkState state = initial_state(params, env_rng);

  RunStats stats;
  stats.slots = slots;
  const std::int64_t batch_len = std::max<std::int64_t>(1, slots / kBatches);
  std::vector<double> batch_means;
  double batch_sum = 0.0;
  std::int64_t in_batch = 0;
  double aoi_sum = 0.0;

  for (std::int64_t t = 0; t < slots; ++t) {
    const Decision d = controller(state, policy_rng);
    const StepOutcome out = step(state, d, params, env_rng);
    const StepInfo& info = out.info;
    stats.reward_sum += out.reward;
    stats.generated += info.packets_generated;
    stats.delivered += info.delivered_gen ? 1 : 0;
    stats.relay_discards += info.relay_discards;
    stats.source_drops += info.source_drops;
    stats.stale_drops += info.stale_drops;
    if (info.violation == Violation::kIdle) {
      ++stats.idle;
    } else if (!info.feasible()) {
      ++stats.infeasible;
    }
    aoi_sum += info.aoi;
    batch_sum += info.aoi;
    if (++in_batch == batch_len) {
      batch_means.push_back(batch_sum / static_cast<double>(batch_len));
      batch_sum = 0.0;
      in_batch = 0;
    }
  }
  for (const auto& r : state.relays) stats.resident_at_end += r.has_packet ? 1 : 0;
  stats.mean_aoi = slots > 0 ? aoi_sum / static_cast<double>(slots) : 0.0;

  if (batch_means.size() >= 2) {
    double m = 0.0;
    for (double b : batch_means) m += b;
    m /= static_cast<double>(batch_means.size());
    double var = 0.0;
    for (double b : batch_means) var += (b - m) * (b - m);
    var /= static_cast<double>(batch_means.size() - 1);
    stats.mean_aoi_se = std::sqrt(var / static_cast<double>(batch_means.size()));
  }
  return stats;
}

}  // namespace aoirelay
