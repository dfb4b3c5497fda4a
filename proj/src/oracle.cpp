#include "aoirelay/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace aoirelay {

double link_success_prob(double power, double distance, double gamma_th, double n0) {
  return std::exp(-gamma_th * n0 * distance * distance / power);
}

SimParams quantized_params(SimParams params) {
  params.channel_model = ChannelModel::kBinary;
  params.energy_model = EnergyModel::kBernoulliInterval;
  return params;
}

// ---------------------------------------------------------------------------
// Miniature dynamics, written against the abstract state only.

MiniRow mini_transition(const MiniEndo& endo, const MiniExo& exo, const Decision& decision,
                        const SimParams& params) {
  const std::size_t K = params.num_relays;
  const int amax = params.aoi_max;
  const int emax = params.energy_buffer_max;

  std::vector<MiniRelay> relays = endo.relays;
  std::vector<bool> harvests(K, false);
  std::optional<int> accepted_age;

  if (decision) {
    const std::size_t k = decision->relay;
    if (decision->direction == Direction::kSourceToRelay) {
      if (exo.arrival) {
        if (exo.h_ok[k]) relays[k] = MiniRelay{true, relays[k].energy, 0, true};
        for (std::size_t j = 0; j < K; ++j) harvests[j] = j != k;
      }
    } else {
      MiniRelay& r = relays[k];
      const bool ok = r.has_packet && r.energy >= 1 && exo.g_ok[k] && r.fresh && !exo.arrival;
      if (ok) {
        const int age = r.age;
        r = MiniRelay{false, r.energy - 1, 0, false};
        if (age <= amax) {
          accepted_age = age;
          for (std::size_t j = 0; j < K; ++j) {
            if (relays[j].has_packet) relays[j].fresh = relays[j].age < age;
          }
        }
      }
    }
  }

  MiniEndo base;
  base.aoi = accepted_age ? *accepted_age : std::min(endo.aoi + 1, amax);
  for (auto& r : relays) {
    if (r.has_packet) r.age = std::min(r.age + 1, amax + 1);
  }
  base.relays = std::move(relays);

  MiniRow row;
  row.cost = base.aoi;
  row.successors.push_back({base, 1.0});
  for (std::size_t j = 0; j < K; ++j) {
    if (!harvests[j] || base.relays[j].energy >= emax) continue;
    const double q = interval_completion_prob(j, params);
    std::vector<MiniSuccessor> next;
    for (const auto& s : row.successors) {
      if (q < 1.0) next.push_back({s.next, s.prob * (1.0 - q)});
      if (q > 0.0) {
        MiniSuccessor up = s;
        up.next.relays[j].energy += 1;
        up.prob *= q;
        next.push_back(std::move(up));
      }
    }
    row.successors = std::move(next);
  }
  return row;
}

// ---------------------------------------------------------------------------
// Mapping between simulator states and the miniature.

MiniEndo to_mini_endo(const NetworkState& state, const SimParams& params) {
  MiniEndo e;
  e.aoi = state.aoi.current;
  e.relays.reserve(state.relays.size());
  for (const auto& r : state.relays) {
    MiniRelay m;
    m.energy = std::min(r.energy_intervals(params), params.energy_buffer_max);
    if (r.has_packet) {
      m.has_packet = true;
      const std::int64_t age = state.slot - r.packet_gen_slot;
      m.age = static_cast<int>(std::min<std::int64_t>(age, params.aoi_max + 1));
      m.fresh = relative_age(r, state.aoi) > 0;
    }
    e.relays.push_back(m);
  }
  return e;
}

MiniExo to_mini_exo(const NetworkState& state, const SimParams& params) {
  MiniExo x;
  x.arrival = state.arrival;
  const double th = params.snr_threshold();
  for (std::size_t k = 0; k < params.num_relays; ++k) {
    x.h_ok.push_back(snr_h(state.channels, k, params) >= th);
    x.g_ok.push_back(snr_g(state.channels, k, params) >= th);
  }
  return x;
}

NetworkState from_mini(const MiniEndo& endo, const MiniExo& exo, const SimParams& params,
                       std::int64_t slot) {
  const int amax = params.aoi_max;
  // Below the cap the AoI is exact; at the cap any true age >= A_max is
  // consistent, so pick one beyond every clamped packet age. The AoI seen at
  // the start of a slot was computed at the end of the previous one, hence
  // the extra slot in the generation time.
  const std::int64_t true_aoi = endo.aoi < amax ? endo.aoi : 3 * (amax + 2);
  NetworkState s;
  s.slot = slot;
  s.aoi.current = endo.aoi;
  s.aoi.last_delivered_gen = slot - true_aoi - 1;
  s.aoi.any_delivery = true;
  for (const auto& m : endo.relays) {
    RelayState r;
    r.energy = m.energy * params.energy_interval();
    if (m.has_packet) {
      r.has_packet = true;
      std::int64_t age = m.age;
      if (m.age > amax) age = m.fresh ? amax + 1 : std::max<std::int64_t>(amax + 1, true_aoi + 1);
      r.packet_gen_slot = slot - age;
    }
    s.relays.push_back(r);
  }
  const double th = params.snr_threshold();
  const double mag_h = std::sqrt(2.0 * th * params.noise_power / params.source_power);
  const double mag_g = std::sqrt(2.0 * th * params.noise_power / params.relay_power);
  for (std::size_t k = 0; k < params.num_relays; ++k) {
    s.channels.h_mag.push_back(exo.h_ok[k] ? mag_h : 0.0);
    s.channels.g_mag.push_back(exo.g_ok[k] ? mag_g : 0.0);
  }
  s.arrival = exo.arrival;
  return s;
}

// ---------------------------------------------------------------------------
// QuantizedMdp

std::uint64_t QuantizedMdp::key(const MiniEndo& e) const {
  const std::uint64_t amax = static_cast<std::uint64_t>(params_.aoi_max);
  const std::uint64_t packet_radix = 1 + 2 * (amax + 1);
  const std::uint64_t relay_radix = packet_radix * static_cast<std::uint64_t>(params_.energy_buffer_max + 1);
  std::uint64_t k = 0;
  for (const auto& r : e.relays) {
    const std::uint64_t pcode =
        r.has_packet ? 1 + 2 * static_cast<std::uint64_t>(r.age - 1) + (r.fresh ? 1 : 0) : 0;
    k = k * relay_radix + static_cast<std::uint64_t>(r.energy) * packet_radix + pcode;
  }
  return k * amax + static_cast<std::uint64_t>(e.aoi - 1);
}

Decision QuantizedMdp::decision(std::size_t a) const {
  if (a == 2 * params_.num_relays) return std::nullopt;
  return action_from_index(a, params_.num_relays);
}

MiniExo QuantizedMdp::exo(std::size_t x) const {
  const std::size_t K = params_.num_relays;
  MiniExo e;
  e.arrival = (x & 1u) != 0;
  for (std::size_t k = 0; k < K; ++k) e.h_ok.push_back(((x >> (1 + k)) & 1u) != 0);
  for (std::size_t k = 0; k < K; ++k) e.g_ok.push_back(((x >> (1 + K + k)) & 1u) != 0);
  return e;
}

std::size_t QuantizedMdp::exo_index(const MiniExo& x) const {
  const std::size_t K = params_.num_relays;
  std::size_t idx = x.arrival ? 1 : 0;
  for (std::size_t k = 0; k < K; ++k) {
    if (x.h_ok[k]) idx |= std::size_t{1} << (1 + k);
    if (x.g_ok[k]) idx |= std::size_t{1} << (1 + K + k);
  }
  return idx;
}

std::optional<std::size_t> QuantizedMdp::find_endo(const MiniEndo& e) const {
  const auto it = endo_index_.find(key(e));
  if (it == endo_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> QuantizedMdp::index_of(const NetworkState& state) const {
  const auto e = find_endo(to_mini_endo(state, params_));
  if (!e) return std::nullopt;
  return *e * exo_count() + exo_index(to_mini_exo(state, params_));
}

QuantizedMdp QuantizedMdp::build(const SimParams& raw, const MiniLimits& limits) {
  raw.validate();
  if (raw.num_relays > limits.max_relays) throw std::invalid_argument("oracle: too many relays for the miniature");
  if (raw.energy_buffer_max > limits.max_energy) throw std::invalid_argument("oracle: energy_max too large for the miniature");
  if (raw.aoi_max > limits.max_aoi) throw std::invalid_argument("oracle: aoi_max too large for the miniature");

  QuantizedMdp mdp;
  mdp.params_ = quantized_params(raw);
  const SimParams& p = mdp.params_;
  const std::size_t K = p.num_relays;
  const double th = p.snr_threshold();

  const std::size_t n_exo = std::size_t{1} << (1 + 2 * K);
  mdp.exo_prob_.resize(n_exo);
  for (std::size_t x = 0; x < n_exo; ++x) {
    const MiniExo e = mdp.exo(x);
    double pr = e.arrival ? p.arrival_prob : 1.0 - p.arrival_prob;
    for (std::size_t k = 0; k < K; ++k) {
      const double ph = link_success_prob(p.source_power, p.distance_h(k), th, p.noise_power);
      const double pg = link_success_prob(p.relay_power, p.distance_g(k), th, p.noise_power);
      pr *= e.h_ok[k] ? ph : 1.0 - ph;
      pr *= e.g_ok[k] ? pg : 1.0 - pg;
    }
    mdp.exo_prob_[x] = pr;
  }

  MiniEndo init;
  init.aoi = p.aoi_max;
  init.relays.assign(K, MiniRelay{false, std::min(p.initial_energy_intervals, p.energy_buffer_max), 0, false});
  mdp.endo_.push_back(init);
  mdp.endo_index_.emplace(mdp.key(init), 0);

  const std::size_t n_act = mdp.action_count();
  mdp.row_ptr_.push_back(0);
  for (std::size_t e = 0; e < mdp.endo_.size(); ++e) {
    if (mdp.endo_.size() * n_exo > limits.max_states) {
      throw std::length_error("oracle: state space exceeds " + std::to_string(limits.max_states));
    }
    for (std::size_t x = 0; x < n_exo; ++x) {
      const MiniExo ex = mdp.exo(x);
      for (std::size_t a = 0; a < n_act; ++a) {
        // endo_ may grow below; copy the source state first.
        const MiniEndo src = mdp.endo_[e];
        MiniRow row = mini_transition(src, ex, mdp.decision(a), p);
        mdp.cost_.push_back(static_cast<double>(row.cost));
        // Merge duplicate successors.
        std::vector<std::pair<std::uint32_t, double>> merged;
        for (auto& s : row.successors) {
          const std::uint64_t k = mdp.key(s.next);
          auto it = mdp.endo_index_.find(k);
          std::uint32_t id;
          if (it == mdp.endo_index_.end()) {
            id = static_cast<std::uint32_t>(mdp.endo_.size());
            mdp.endo_index_.emplace(k, id);
            mdp.endo_.push_back(std::move(s.next));
          } else {
            id = it->second;
          }
          auto m = std::find_if(merged.begin(), merged.end(), [&](const auto& v) { return v.first == id; });
          if (m == merged.end()) {
            merged.emplace_back(id, s.prob);
          } else {
            m->second += s.prob;
          }
        }
        for (const auto& [id, pr] : merged) {
          mdp.succ_.push_back(id);
          mdp.prob_.push_back(pr);
        }
        mdp.row_ptr_.push_back(mdp.succ_.size());
      }
    }
  }
  return mdp;
}

QuantizedMdp QuantizedMdp::from_table(std::size_t endo_count, std::vector<double> exo_prob,
                                      std::vector<double> cost,
                                      const std::vector<std::vector<std::pair<std::uint32_t, double>>>& rows) {
  QuantizedMdp mdp;
  mdp.params_.num_relays = 1;
  mdp.endo_.resize(endo_count);
  mdp.exo_prob_ = std::move(exo_prob);
  const std::size_t n = endo_count * mdp.exo_prob_.size() * mdp.action_count();
  if (cost.size() != n || rows.size() != n) throw std::invalid_argument("oracle: table size mismatch");
  mdp.cost_ = std::move(cost);
  mdp.row_ptr_.push_back(0);
  for (const auto& row : rows) {
    for (const auto& [next, pr] : row) {
      if (next >= endo_count) throw std::invalid_argument("oracle: successor out of range");
      mdp.succ_.push_back(next);
      mdp.prob_.push_back(pr);
    }
    mdp.row_ptr_.push_back(mdp.succ_.size());
  }
  return mdp;
}

// ---------------------------------------------------------------------------
// Relative value iteration

namespace {

// Exogenous expectation of h for each endogenous successor.
double expected_bias(const QuantizedMdp& mdp, const std::vector<double>& h, std::size_t e) {
  const std::size_t X = mdp.exo_count();
  double w = 0.0;
  for (std::size_t x = 0; x < X; ++x) w += mdp.exo_prob(x) * h[e * X + x];
  return w;
}

double bellman_row(const QuantizedMdp& mdp, const std::vector<double>& w, std::size_t s,
                   std::uint8_t& best_action) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < mdp.action_count(); ++a) {
    double v = mdp.cost(s, a);
    for (std::size_t i = mdp.row_begin(s, a); i < mdp.row_end(s, a); ++i) {
      v += mdp.succ_prob(i) * w[mdp.succ_endo(i)];
    }
    if (v < best) {
      best = v;
      best_action = static_cast<std::uint8_t>(a);
    }
  }
  return best;
}

void finish(OracleSolution& sol, double dmin, double dmax, int it) {
  sol.gain_lower = dmin;
  sol.gain_upper = dmax;
  sol.gain = 0.5 * (dmin + dmax);
  sol.residual_span = dmax - dmin;
  sol.iterations = it;
}

}  // namespace

OracleSolution relative_value_iteration_serial(const QuantizedMdp& mdp, const RviOptions& opts) {
  const std::size_t S = mdp.state_count();
  const std::size_t E = mdp.endo_count();
  OracleSolution sol;
  sol.bias.assign(S, 0.0);
  sol.policy.assign(S, 0);
  std::vector<double> w(E), th(S);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    for (std::size_t e = 0; e < E; ++e) w[e] = expected_bias(mdp, sol.bias, e);
    double dmin = std::numeric_limits<double>::infinity();
    double dmax = -dmin;
    for (std::size_t s = 0; s < S; ++s) {
      th[s] = bellman_row(mdp, w, s, sol.policy[s]);
      const double d = th[s] - sol.bias[s];
      dmin = std::min(dmin, d);
      dmax = std::max(dmax, d);
    }
    if (dmax - dmin < opts.tol) {
      finish(sol, dmin, dmax, it);
      return sol;
    }
    for (std::size_t s = 0; s < S; ++s) sol.bias[s] += opts.aperiodicity * (th[s] - sol.bias[s]);
    const double ref = sol.bias[0];
    for (std::size_t s = 0; s < S; ++s) sol.bias[s] -= ref;
  }
  throw std::runtime_error("relative value iteration did not converge");
}

OracleSolution relative_value_iteration(const QuantizedMdp& mdp, const RviOptions& opts) {
  const std::ptrdiff_t S = static_cast<std::ptrdiff_t>(mdp.state_count());
  const std::ptrdiff_t E = static_cast<std::ptrdiff_t>(mdp.endo_count());
  OracleSolution sol;
  sol.bias.assign(static_cast<std::size_t>(S), 0.0);
  sol.policy.assign(static_cast<std::size_t>(S), 0);
  std::vector<double> w(static_cast<std::size_t>(E)), th(static_cast<std::size_t>(S));
  for (int it = 1; it <= opts.max_iterations; ++it) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t e = 0; e < E; ++e) w[e] = expected_bias(mdp, sol.bias, static_cast<std::size_t>(e));
    double dmin = std::numeric_limits<double>::infinity();
    double dmax = -dmin;
#pragma omp parallel for schedule(static) reduction(min : dmin) reduction(max : dmax)
    for (std::ptrdiff_t s = 0; s < S; ++s) {
      th[s] = bellman_row(mdp, w, static_cast<std::size_t>(s), sol.policy[s]);
      const double d = th[s] - sol.bias[s];
      dmin = std::min(dmin, d);
      dmax = std::max(dmax, d);
    }
    if (dmax - dmin < opts.tol) {
      finish(sol, dmin, dmax, it);
      return sol;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < S; ++s) sol.bias[s] += opts.aperiodicity * (th[s] - sol.bias[s]);
    const double ref = sol.bias[0];
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < S; ++s) sol.bias[s] -= ref;
  }
  throw std::runtime_error("relative value iteration did not converge");
}

RunStats simulate_policy(const QuantizedMdp& mdp, const OracleSolution& solution,
                         std::int64_t slots, std::uint64_t seed) {
  Controller c = [&mdp, &solution](const NetworkState& state, Rng&) -> Decision {
    const auto idx = mdp.index_of(state);
    if (!idx) throw std::runtime_error("oracle: simulator state outside the quantized table");
    return mdp.decision(solution.policy[*idx]);
  };
  return simulate(mdp.params(), c, slots, seed);
}

}  // namespace aoirelay
