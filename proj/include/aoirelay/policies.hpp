#pragma once

#include <optional>
#include <string_view>

#include "aoirelay/env.hpp"
#include "aoirelay/rng.hpp"

namespace aoirelay {

enum class PolicyKind { kMaxLink, kGreedy, kDbrsVariant, kRandom };

std::string_view to_string(PolicyKind kind);
std::optional<PolicyKind> parse_policy_kind(std::string_view name);

// Highest-SNR link among all links that pass check_feasible. Ties go to the
// lowest (direction, relay) pair.
Decision max_link_select(const NetworkState& state, const SimParams& params);

// Reception turn (arrival): an empty-buffer relay picked uniformly at random,
// otherwise the relay holding the oldest packet; SNR is not consulted.
// Transmission turn: among RD-feasible relays the one with the newest packet.
Decision greedy_select(const NetworkState& state, const SimParams& params, Rng& rng);

// Direction forced by the arrival flag; relay chosen by max-min SNR
// min(gamma_h, gamma_g). Receivers with energy and an empty buffer are
// preferred; when none exists any SR-feasible relay may receive.
Decision dbrs_variant_select(const NetworkState& state, const SimParams& params);

// Uniform over the 2K actions.
Action random_select(const NetworkState& state, const SimParams& params, Rng& rng);

Decision select(PolicyKind kind, const NetworkState& state, const SimParams& params,
                Rng& rng);

}  // namespace aoirelay
