#include "aoirelay/policies.hpp"

#include <algorithm>
#include <vector>

namespace aoirelay {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kMaxLink: return "max-link";
    case PolicyKind::kGreedy: return "greedy";
    case PolicyKind::kDbrsVariant: return "dbrs-variant";
    case PolicyKind::kRandom: return "random";
  }
  return "unknown";
}

std::optional<PolicyKind> parse_policy_kind(std::string_view name) {
  if (name == "max-link" || name == "maxlink") return PolicyKind::kMaxLink;
  if (name == "greedy") return PolicyKind::kGreedy;
  if (name == "dbrs-variant" || name == "dbrs") return PolicyKind::kDbrsVariant;
  if (name == "random") return PolicyKind::kRandom;
  return std::nullopt;
}

Decision max_link_select(const NetworkState& state, const SimParams& params) {
  const std::size_t K = params.num_relays;
  Decision best;
  double best_snr = -1.0;
  for (std::size_t idx = 0; idx < 2 * K; ++idx) {
    const Action a = action_from_index(idx, K);
    if (check_feasible(state, a, params) != Violation::kNone) continue;
    const double snr = a.direction == Direction::kSourceToRelay
                           ? snr_h(state.channels, a.relay, params)
                           : snr_g(state.channels, a.relay, params);
    if (snr > best_snr) {
      best_snr = snr;
      best = a;
    }
  }
  return best;
}

Decision greedy_select(const NetworkState& state, const SimParams& params, Rng& rng) {
  const std::size_t K = params.num_relays;
  if (state.arrival) {
    std::vector<std::size_t> empty;
    for (std::size_t k = 0; k < K; ++k) {
      if (!state.relays[k].has_packet) empty.push_back(k);
    }
    if (!empty.empty()) return Action::sr(empty[rng.uniform_index(empty.size())]);
    std::size_t oldest = 0;
    for (std::size_t k = 1; k < K; ++k) {
      if (state.relays[k].packet_gen_slot < state.relays[oldest].packet_gen_slot) oldest = k;
    }
    return Action::sr(oldest);
  }
  Decision best;
  std::int64_t newest = 0;
  for (std::size_t k = 0; k < K; ++k) {
    if (check_feasible(state, Action::rd(k), params) != Violation::kNone) continue;
    const std::int64_t gen = state.relays[k].packet_gen_slot;
    if (!best || gen > newest) {
      newest = gen;
      best = Action::rd(k);
    }
  }
  return best;
}

Decision dbrs_variant_select(const NetworkState& state, const SimParams& params) {
  const std::size_t K = params.num_relays;
  auto max_min = [&](std::size_t k) {
    return std::min(snr_h(state.channels, k, params), snr_g(state.channels, k, params));
  };
  Decision best;
  double best_score = -1.0;
  if (state.arrival) {
    bool best_preferred = false;
    for (std::size_t k = 0; k < K; ++k) {
      const Action a = Action::sr(k);
      if (check_feasible(state, a, params) != Violation::kNone) continue;
      const RelayState& r = state.relays[k];
      const bool preferred = r.energy_intervals(params) != 0 && !r.has_packet;
      const double score = max_min(k);
      if (!best || (preferred && !best_preferred) ||
          (preferred == best_preferred && score > best_score)) {
        best = a;
        best_score = score;
        best_preferred = preferred;
      }
    }
    return best;
  }
  for (std::size_t k = 0; k < K; ++k) {
    const Action a = Action::rd(k);
    if (check_feasible(state, a, params) != Violation::kNone) continue;
    const double score = max_min(k);
    if (score > best_score) {
      best = a;
      best_score = score;
    }
  }
  return best;
}

Action random_select(const NetworkState&, const SimParams& params, Rng& rng) {
  return action_from_index(rng.uniform_index(params.action_count()), params.num_relays);
}

Decision select(PolicyKind kind, const NetworkState& state, const SimParams& params,
                Rng& rng) {
  switch (kind) {
    case PolicyKind::kMaxLink: return max_link_select(state, params);
    case PolicyKind::kGreedy: return greedy_select(state, params, rng);
    case PolicyKind::kDbrsVariant: return dbrs_variant_select(state, params);
    case PolicyKind::kRandom: return random_select(state, params, rng);
  }
  return std::nullopt;
}

}  // namespace aoirelay
