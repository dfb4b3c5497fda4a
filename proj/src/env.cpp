#include "aoirelay/env.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>
#include <string>

namespace aoirelay {

namespace {

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
}

// Gain magnitude a binary-model link reports on success: SNR = 2 * gamma_th.
double binary_success_mag(double power, const SimParams& params) {
  return std::sqrt(2.0 * params.snr_threshold() * params.noise_power / power);
}

double link_success_prob_closed_form(double power, double mean_gain,
                                     const SimParams& params) {
  return std::exp(-params.snr_threshold() * params.noise_power / (power * mean_gain));
}

}  // namespace

// ---------------------------------------------------------------------------
// SimParams

double SimParams::snr_threshold() const {
  if (snr_threshold_override) return *snr_threshold_override;
  return std::pow(2.0, 2.0 * target_rate - 1.0);
}

double SimParams::infeasible_penalty() const {
  if (penalty_override) return *penalty_override;
  return -static_cast<double>(aoi_max);
}

double SimParams::distance_h(std::size_t k) const {
  return source_relay_distance.empty() ? link_distance : source_relay_distance.at(k);
}

double SimParams::distance_g(std::size_t k) const {
  return relay_dest_distance.empty() ? link_distance : relay_dest_distance.at(k);
}

double SimParams::mean_gain_h(std::size_t k) const {
  const double d = distance_h(k);
  return 1.0 / (d * d);
}

double SimParams::mean_gain_g(std::size_t k) const {
  const double d = distance_g(k);
  return 1.0 / (d * d);
}

void SimParams::validate() const {
  require(num_relays >= 1, "relays", "must be >= 1");
  require(arrival_prob >= 0.0 && arrival_prob <= 1.0, "lambda", "must lie in [0, 1]");
  require(aoi_max >= 1, "aoi_max", "must be >= 1");
  require(energy_buffer_max >= 1, "energy_max", "must be >= 1");
  require(conversion_efficiency > 0.0 && conversion_efficiency < 1.0, "eta",
          "must lie in (0, 1)");
  require(source_power > 0.0, "source_power", "must be > 0");
  require(relay_power > 0.0, "relay_power", "must be > 0");
  require(noise_power > 0.0, "noise_power", "must be > 0");
  require(slot_length > 0.0, "slot_length", "must be > 0");
  require(link_distance > 0.0, "distance", "must be > 0");
  require(snr_threshold() > 0.0, "snr_threshold", "must be > 0");
  require(horizon >= 1, "horizon", "must be >= 1");
  require(initial_energy_intervals >= 0 && initial_energy_intervals <= energy_buffer_max,
          "initial_energy", "must lie in [0, energy_max]");
  for (const auto* v : {&source_relay_distance, &relay_dest_distance}) {
    require(v->empty() || v->size() == num_relays, "distance",
            "per-relay list must have one entry per relay");
    for (double d : *v) require(d > 0.0, "distance", "must be > 0");
  }
  if (penalty_override) require(std::isfinite(*penalty_override), "penalty", "must be finite");
}

// ---------------------------------------------------------------------------
// Actions

std::size_t action_index(Action action, std::size_t num_relays) {
  return action.direction == Direction::kSourceToRelay ? action.relay
                                                       : num_relays + action.relay;
}

Action action_from_index(std::size_t index, std::size_t num_relays) {
  if (index >= 2 * num_relays) {
    throw std::out_of_range("action index " + std::to_string(index) +
                            " outside action space of size " +
                            std::to_string(2 * num_relays));
  }
  return index < num_relays ? Action::sr(index) : Action::rd(index - num_relays);
}

std::string_view to_string(Violation v) {
  switch (v) {
    case Violation::kNone: return "none";
    case Violation::kNoArrival: return "no_arrival";
    case Violation::kBufferEmpty: return "buffer_empty";
    case Violation::kEnergyEmpty: return "energy_empty";
    case Violation::kSnrBelowThreshold: return "snr_below_threshold";
    case Violation::kOutdated: return "outdated";
    case Violation::kArrivalPending: return "arrival_pending";
    case Violation::kIdle: return "idle";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Primitives

double snr_h(const ChannelRealization& ch, std::size_t k, const SimParams& params) {
  return ch.h_mag[k] * ch.h_mag[k] * params.source_power / params.noise_power;
}

double snr_g(const ChannelRealization& ch, std::size_t k, const SimParams& params) {
  return ch.g_mag[k] * ch.g_mag[k] * params.relay_power / params.noise_power;
}

ChannelRealization sample_channels(Rng& rng, const SimParams& params) {
  const std::size_t K = params.num_relays;
  ChannelRealization ch;
  ch.h_mag.resize(K);
  ch.g_mag.resize(K);
  if (params.channel_model == ChannelModel::kRayleigh) {
    for (std::size_t k = 0; k < K; ++k) ch.h_mag[k] = std::sqrt(rng.exponential(params.mean_gain_h(k)));
    for (std::size_t k = 0; k < K; ++k) ch.g_mag[k] = std::sqrt(rng.exponential(params.mean_gain_g(k)));
  } else {
    for (std::size_t k = 0; k < K; ++k) {
      const double p = link_success_prob_closed_form(params.source_power, params.mean_gain_h(k), params);
      ch.h_mag[k] = rng.bernoulli(p) ? binary_success_mag(params.source_power, params) : 0.0;
    }
    for (std::size_t k = 0; k < K; ++k) {
      const double p = link_success_prob_closed_form(params.relay_power, params.mean_gain_g(k), params);
      ch.g_mag[k] = rng.bernoulli(p) ? binary_success_mag(params.relay_power, params) : 0.0;
    }
  }
  return ch;
}

double harvested_energy(double h_mag, const SimParams& params) {
  return params.conversion_efficiency * params.source_power * h_mag * h_mag *
         params.slot_length;
}

double interval_completion_prob(std::size_t k, const SimParams& params) {
  const double mean = params.conversion_efficiency * params.source_power *
                      params.mean_gain_h(k) * params.slot_length;
  return std::min(1.0, mean / params.energy_interval());
}

int RelayState::energy_intervals(const SimParams& params) const {
  return static_cast<int>(std::floor(energy / params.energy_interval()));
}

double credit_energy(RelayState& relay, double delta, const SimParams& params) {
  const double before = relay.energy;
  relay.energy = std::min(relay.energy + delta, params.energy_capacity());
  return relay.energy - before;
}

bool update_aoi(AoiTracker& tracker, std::optional<std::int64_t> delivery_gen,
                std::int64_t slot, int aoi_max) {
  if (delivery_gen) {
    if (*delivery_gen <= tracker.last_delivered_gen) {
      throw std::logic_error("update_aoi: delivered packet is not fresher than the last accepted one");
    }
    const std::int64_t age = slot - *delivery_gen;
    if (age <= aoi_max) {
      tracker.current = static_cast<int>(age);
      tracker.last_delivered_gen = *delivery_gen;
      tracker.any_delivery = true;
      return true;
    }
  }
  tracker.current = std::min(tracker.current + 1, aoi_max);
  return false;
}

std::int64_t relative_age(const RelayState& relay, const AoiTracker& tracker) {
  return relay.has_packet ? relay.packet_gen_slot - tracker.last_delivered_gen : 0;
}

Violation check_feasible(const NetworkState& state, Action action,
                         const SimParams& params) {
  const std::size_t k = action.relay;
  if (k >= params.num_relays) throw std::out_of_range("check_feasible: relay index out of range");
  const double th = params.snr_threshold();
  if (action.direction == Direction::kSourceToRelay) {
    if (!state.arrival) return Violation::kNoArrival;
    if (snr_h(state.channels, k, params) < th) return Violation::kSnrBelowThreshold;
    return Violation::kNone;
  }
  const RelayState& relay = state.relays[k];
  if (!relay.has_packet) return Violation::kBufferEmpty;
  if (relay.energy_intervals(params) < 1) return Violation::kEnergyEmpty;
  if (snr_g(state.channels, k, params) < th) return Violation::kSnrBelowThreshold;
  if (relative_age(relay, state.aoi) <= 0) return Violation::kOutdated;
  if (state.arrival) return Violation::kArrivalPending;
  return Violation::kNone;
}

// ---------------------------------------------------------------------------
// State evolution

NetworkState initial_state(const SimParams& params, Rng& rng) {
  NetworkState s;
  s.slot = 1;
  s.relays.assign(params.num_relays, RelayState{});
  for (auto& r : s.relays) {
    r.energy = std::min(params.initial_energy_intervals * params.energy_interval(),
                        params.energy_capacity());
  }
  s.aoi.current = params.aoi_max;
  s.aoi.last_delivered_gen = s.slot - params.aoi_max;
  s.aoi.any_delivery = false;
  auto channels = sample_channels(rng, params);
  const bool arrival = rng.bernoulli(params.arrival_prob);
  begin_slot(s, std::move(channels), arrival);
  return s;
}

std::vector<double> offered_harvest(const NetworkState& state,
                                    const SimParams& params, Rng& rng) {
  const std::size_t K = params.num_relays;
  std::vector<double> out(K, 0.0);
  if (params.energy_model == EnergyModel::kContinuous) {
    for (std::size_t k = 0; k < K; ++k) out[k] = harvested_energy(state.channels.h_mag[k], params);
  } else {
    for (std::size_t k = 0; k < K; ++k) {
      out[k] = rng.bernoulli(interval_completion_prob(k, params)) ? params.energy_interval() : 0.0;
    }
  }
  return out;
}

StepOutcome resolve_slot(NetworkState& state, const Decision& decision,
                         const SimParams& params, std::span<const double> harvest) {
  const std::size_t K = params.num_relays;
  const std::int64_t n = state.slot;
  StepOutcome out;
  StepInfo& info = out.info;
  info.harvested.assign(K, 0.0);
  info.packets_generated = state.arrival ? 1 : 0;

  auto harvest_all_but = [&](std::size_t selected) {
    for (std::size_t j = 0; j < K; ++j) {
      if (j != selected) info.harvested[j] = credit_energy(state.relays[j], harvest[j], params);
    }
  };

  bool stored = false;
  std::optional<std::int64_t> delivery;
  if (!decision) {
    info.violation = Violation::kIdle;
  } else {
    const Action a = *decision;
    info.violation = check_feasible(state, a, params);
    RelayState& relay = state.relays[a.relay];
    if (info.feasible() && a.direction == Direction::kSourceToRelay) {
      if (relay.has_packet) ++info.relay_discards;
      relay.has_packet = true;
      relay.packet_gen_slot = n;
      stored = true;
      harvest_all_but(a.relay);
    } else if (info.feasible()) {
      assert(relay.has_packet && relay.energy_intervals(params) >= 1);
      assert(relative_age(relay, state.aoi) > 0 && !state.arrival);
      out.reward = static_cast<double>(relative_age(relay, state.aoi));
      relay.energy = std::max(0.0, relay.energy - params.energy_interval());
      relay.has_packet = false;
      delivery = relay.packet_gen_slot;
    } else {
      out.reward = params.infeasible_penalty();
      // S still radiates when it has a packet and only the chosen S-R link failed.
      if (a.direction == Direction::kSourceToRelay && state.arrival &&
          info.violation == Violation::kSnrBelowThreshold) {
        harvest_all_but(a.relay);
      }
    }
  }

  const bool accepted = update_aoi(state.aoi, delivery, n, params.aoi_max);
  if (delivery && !accepted) ++info.stale_drops;
  if (accepted) info.delivered_gen = delivery;
  if (state.arrival && !stored) ++info.source_drops;

  if (stored) {
    double sum = 0.0;
    for (const auto& r : state.relays) sum += static_cast<double>(relative_age(r, state.aoi));
    out.reward = sum;
  }
  info.aoi = state.aoi.current;
  ++state.slot;
  return out;
}

void begin_slot(NetworkState& state, ChannelRealization channels, bool arrival) {
  state.channels = std::move(channels);
  state.arrival = arrival;
}

StepOutcome step(NetworkState& state, const Decision& decision,
                 const SimParams& params, Rng& rng) {
  const auto harvest = offered_harvest(state, params, rng);
  StepOutcome out = resolve_slot(state, decision, params, harvest);
  auto channels = sample_channels(rng, params);
  const bool arrival = rng.bernoulli(params.arrival_prob);
  begin_slot(state, std::move(channels), arrival);
  return out;
}

StepOutcome step(NetworkState& state, std::size_t index, const SimParams& params,
                 Rng& rng) {
  return step(state, Decision(action_from_index(index, params.num_relays)), params, rng);
}

void observe_into(const NetworkState& state, const SimParams& params,
                  std::span<double> out) {
  const std::size_t K = params.num_relays;
  if (out.size() != params.observation_dim()) {
    throw std::invalid_argument("observe: output span has the wrong length");
  }
  auto normalized = [&](const std::vector<double>& mags, std::size_t offset) {
    const double m = *std::max_element(mags.begin(), mags.end());
    for (std::size_t k = 0; k < K; ++k) out[offset + k] = m > 0.0 ? mags[k] / m : 0.0;
  };
  normalized(state.channels.h_mag, 0);
  normalized(state.channels.g_mag, K);
  const double emax = params.energy_buffer_max;
  const double amax = params.aoi_max;
  for (std::size_t k = 0; k < K; ++k) {
    const RelayState& r = state.relays[k];
    out[2 * K + k] = r.has_packet ? 1.0 : 0.0;
    out[3 * K + k] = std::min(r.energy_intervals(params), params.energy_buffer_max) / emax;
    const double rel = static_cast<double>(relative_age(r, state.aoi)) / amax;
    out[4 * K + k] = std::clamp(rel, -1.0, 1.0);
  }
  out[5 * K] = state.arrival ? 1.0 : 0.0;
}

std::vector<double> observe(const NetworkState& state, const SimParams& params) {
  std::vector<double> out(params.observation_dim());
  observe_into(state, params, out);
  return out;
}

// ---------------------------------------------------------------------------
// Environment

Environment::Environment(SimParams params, std::uint64_t seed)
    : params_(std::move(params)), rng_(seed) {
  params_.validate();
  state_ = initial_state(params_, rng_);
}

const NetworkState& Environment::reset() {
  state_ = initial_state(params_, rng_);
  return state_;
}

StepOutcome Environment::step(const Decision& decision) {
  return aoirelay::step(state_, decision, params_, rng_);
}

StepOutcome Environment::step(std::size_t index) {
  return aoirelay::step(state_, index, params_, rng_);
}

}  // namespace aoirelay
