#pragma once

// Dual-hop status-update network with energy-harvesting relays.
//
// Slot convention: a NetworkState describes the start of slot `slot`,
// including that slot's channel draw and arrival flag. Stepping resolves
// the slot (transmission, harvesting, AoI bookkeeping), advances the slot
// counter and draws the exogenous quantities of the next slot.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "aoirelay/rng.hpp"

namespace aoirelay {

enum class ChannelModel {
  kRayleigh,  // |h|^2 ~ Exp(mean d^-2)
  kBinary,    // per-link decode success/failure only (oracle miniature)
};

enum class EnergyModel {
  kContinuous,        // harvest = eta * P_S * |h|^2 * t joules
  kBernoulliInterval  // one whole interval with the mean completion rate (oracle miniature)
};

struct SimParams {
  std::size_t num_relays = 3;
  double arrival_prob = 0.3;
  int aoi_max = 100;
  int energy_buffer_max = 3;  // in energy intervals
  double conversion_efficiency = 0.5;
  double source_power = 1e5;  // W
  double relay_power = 100.0;  // W
  double noise_power = 0.01;  // W
  double target_rate = 1.0;  // bit/s/Hz
  std::optional<double> snr_threshold_override;
  double slot_length = 1.0;  // s
  double link_distance = 36.0;  // m, used when the per-relay vectors are empty
  std::vector<double> source_relay_distance;
  std::vector<double> relay_dest_distance;
  int horizon = 2000;
  std::optional<double> penalty_override;
  int initial_energy_intervals = 1;
  ChannelModel channel_model = ChannelModel::kRayleigh;
  EnergyModel energy_model = EnergyModel::kContinuous;

  // 2^(2R - 1) unless overridden.
  double snr_threshold() const;
  // Reward assigned to infeasible actions; -A_max unless overridden.
  double infeasible_penalty() const;
  double energy_interval() const { return relay_power * slot_length; }
  double energy_capacity() const { return energy_buffer_max * energy_interval(); }
  double distance_h(std::size_t k) const;
  double distance_g(std::size_t k) const;
  // Mean of |h_k|^2 and |g_k|^2.
  double mean_gain_h(std::size_t k) const;
  double mean_gain_g(std::size_t k) const;

  std::size_t action_count() const { return 2 * num_relays; }
  std::size_t observation_dim() const { return 5 * num_relays + 1; }

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct ChannelRealization {
  std::vector<double> h_mag;
  std::vector<double> g_mag;
};

struct RelayState {
  bool has_packet = false;
  std::int64_t packet_gen_slot = 0;  // valid only with has_packet
  double energy = 0.0;  // joules

  int energy_intervals(const SimParams& params) const;
};

struct AoiTracker {
  int current = 0;
  // Generation slot of the freshest packet accepted at D. Before the first
  // delivery this holds a sentinel placed A_max slots before the first slot,
  // so every real packet compares as fresh.
  std::int64_t last_delivered_gen = 0;
  bool any_delivery = false;
};

struct NetworkState {
  std::int64_t slot = 1;
  std::vector<RelayState> relays;
  AoiTracker aoi;
  ChannelRealization channels;
  bool arrival = false;
};

enum class Direction : std::uint8_t { kSourceToRelay, kRelayToDest };

struct Action {
  Direction direction = Direction::kSourceToRelay;
  std::size_t relay = 0;  // zero-based

  static Action sr(std::size_t k) { return {Direction::kSourceToRelay, k}; }
  static Action rd(std::size_t k) { return {Direction::kRelayToDest, k}; }
  bool operator==(const Action&) const = default;
};

// Baseline policies may decline to activate any link; the agent never does.
using Decision = std::optional<Action>;

// Index layout of the agent's 2K actions: SR(k) -> k, RD(k) -> K + k.
std::size_t action_index(Action action, std::size_t num_relays);
// Throws std::out_of_range for index >= 2K.
Action action_from_index(std::size_t index, std::size_t num_relays);

enum class Violation : std::uint8_t {
  kNone,
  kNoArrival,       // SR chosen with no fresh packet at S
  kBufferEmpty,     // RD: delta_k = 0
  kEnergyEmpty,     // RD: eps_k = 0
  kSnrBelowThreshold,
  kOutdated,        // RD: relative age <= 0
  kArrivalPending,  // RD chosen while S has a packet to send
  kIdle,            // no link activated (baselines only)
};

std::string_view to_string(Violation v);

struct StepInfo {
  std::optional<std::int64_t> delivered_gen;  // accepted at D this slot
  Violation violation = Violation::kNone;
  int packets_generated = 0;
  int relay_discards = 0;
  int source_drops = 0;
  int stale_drops = 0;
  std::vector<double> harvested;  // joules credited per relay, after clipping
  int aoi = 0;  // A(n) after the slot

  bool feasible() const { return violation == Violation::kNone; }
};

struct StepOutcome {
  double reward = 0.0;
  StepInfo info;
};

// --- channel and energy primitives ---

double snr_h(const ChannelRealization& ch, std::size_t k, const SimParams& params);
double snr_g(const ChannelRealization& ch, std::size_t k, const SimParams& params);

ChannelRealization sample_channels(Rng& rng, const SimParams& params);

double harvested_energy(double h_mag, const SimParams& params);

// Mean per-slot probability that a harvesting relay completes one whole
// interval, used by the Bernoulli energy model: E[harvest] / interval,
// clipped to 1.
double interval_completion_prob(std::size_t k, const SimParams& params);

// Saturating credit; returns the joules actually stored.
double credit_energy(RelayState& relay, double delta, const SimParams& params);

// Advances the tracker by one slot. Returns true when the delivery was
// accepted, false when there was none or it was stale (n - gen > A_max).
// Throws std::logic_error if gen <= last_delivered_gen.
bool update_aoi(AoiTracker& tracker, std::optional<std::int64_t> delivery_gen,
                std::int64_t slot, int aoi_max);

std::int64_t relative_age(const RelayState& relay, const AoiTracker& tracker);

Violation check_feasible(const NetworkState& state, Action action,
                         const SimParams& params);

// --- state evolution ---

NetworkState initial_state(const SimParams& params, Rng& rng);

// Per-relay energy offered to each relay if it harvests this slot.
std::vector<double> offered_harvest(const NetworkState& state,
                                    const SimParams& params, Rng& rng);

// Resolves the current slot given explicit harvest amounts and advances
// the slot counter. Does not draw the next slot's channels or arrival.
StepOutcome resolve_slot(NetworkState& state, const Decision& decision,
                         const SimParams& params,
                         std::span<const double> harvest);

// Installs the exogenous quantities of the (new) current slot.
void begin_slot(NetworkState& state, ChannelRealization channels, bool arrival);

// Full slot: offered_harvest, resolve_slot, then draw the next slot.
StepOutcome step(NetworkState& state, const Decision& decision,
                 const SimParams& params, Rng& rng);

// Throws std::out_of_range for a malformed action index.
StepOutcome step(NetworkState& state, std::size_t action_index,
                 const SimParams& params, Rng& rng);

std::vector<double> observe(const NetworkState& state, const SimParams& params);
void observe_into(const NetworkState& state, const SimParams& params,
                  std::span<double> out);

// Owns parameters, state and the environment's random stream.
class Environment {
 public:
  Environment(SimParams params, std::uint64_t seed);

  const NetworkState& reset();
  StepOutcome step(const Decision& decision);
  StepOutcome step(std::size_t action_index);

  const NetworkState& state() const { return state_; }
  NetworkState& mutable_state() { return state_; }
  const SimParams& params() const { return params_; }
  std::vector<double> observe() const { return aoirelay::observe(state_, params_); }

 private:
  SimParams params_;
  Rng rng_;
  NetworkState state_;
};

}  // namespace aoirelay
