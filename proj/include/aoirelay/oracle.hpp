#pragma once

// Exact average-cost solver for a quantized miniature of the relay network.
//
// Quantization: each link is reduced to "decodes / does not decode" with its
// closed-form Rayleigh success probability, and a harvesting relay gains one
// whole energy interval with probability E[harvest] / interval. The matching
// simulator variant is SimParams{channel_model = kBinary,
// energy_model = kBernoulliInterval}.
//
// State at the start of a slot = endogenous part (per relay: buffer flag,
// energy intervals, packet age clamped at A_max + 1, sign of the relative
// age; plus the AoI) x exogenous part (arrival bit, per-link decode bits).
// Packet ages rather than relative ages are tracked because the AoI after a
// delivery equals the delivered packet's age.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aoirelay/env.hpp"
#include "aoirelay/simulate.hpp"

namespace aoirelay {

// P(|h|^2 * power / n0 >= gamma_th) for |h|^2 ~ Exp(mean d^-2).
double link_success_prob(double power, double distance, double gamma_th, double n0);

struct MiniRelay {
  bool has_packet = false;
  int energy = 0;  // whole intervals
  int age = 0;  // 1..A_max+1 when has_packet; A_max+1 means "older than A_max"
  bool fresh = false;  // relative age > 0

  bool operator==(const MiniRelay&) const = default;
};

struct MiniEndo {
  std::vector<MiniRelay> relays;
  int aoi = 0;

  bool operator==(const MiniEndo&) const = default;
};

struct MiniExo {
  bool arrival = false;
  std::vector<bool> h_ok;
  std::vector<bool> g_ok;
};

struct MiniSuccessor {
  MiniEndo next;
  double prob = 0.0;
};

struct MiniLimits {
  std::size_t max_relays = 2;
  int max_energy = 2;
  int max_aoi = 10;
  std::size_t max_states = 1'000'000;
};

// Kernel row for one (state, decision): successor endogenous states with
// their probabilities (duplicates merged) and the slot cost A(n).
struct MiniRow {
  std::vector<MiniSuccessor> successors;
  int cost = 0;
};

MiniRow mini_transition(const MiniEndo& endo, const MiniExo& exo, const Decision& decision,
                        const SimParams& params);

class QuantizedMdp {
 public:
  // Enumerates the states reachable from the initial configuration.
  // Throws std::invalid_argument when params exceed the limits and
  // std::length_error when the state count overflows.
  static QuantizedMdp build(const SimParams& params, const MiniLimits& limits = {});

  // Hand-made table with a single relay's action set (three actions).
  // rows[s * 3 + a] lists (endogenous successor, probability); s runs over
  // endo_count * exo_prob.size() full states.
  static QuantizedMdp from_table(std::size_t endo_count, std::vector<double> exo_prob,
                                 std::vector<double> cost,
                                 const std::vector<std::vector<std::pair<std::uint32_t, double>>>& rows);

  const SimParams& params() const { return params_; }
  std::size_t endo_count() const { return endo_.size(); }
  std::size_t exo_count() const { return exo_prob_.size(); }
  std::size_t state_count() const { return endo_count() * exo_count(); }
  // 2K link actions followed by Idle.
  std::size_t action_count() const { return 2 * params_.num_relays + 1; }
  Decision decision(std::size_t a) const;

  const MiniEndo& endo(std::size_t e) const { return endo_[e]; }
  MiniExo exo(std::size_t x) const;
  double exo_prob(std::size_t x) const { return exo_prob_[x]; }
  std::optional<std::size_t> find_endo(const MiniEndo& e) const;
  std::size_t exo_index(const MiniExo& x) const;
  std::size_t initial_endo() const { return 0; }

  // CSR row for full state s = e * exo_count() + x and action a.
  double cost(std::size_t s, std::size_t a) const { return cost_[s * action_count() + a]; }
  std::size_t row_begin(std::size_t s, std::size_t a) const { return row_ptr_[s * action_count() + a]; }
  std::size_t row_end(std::size_t s, std::size_t a) const { return row_ptr_[s * action_count() + a + 1]; }
  std::uint32_t succ_endo(std::size_t i) const { return succ_[i]; }
  double succ_prob(std::size_t i) const { return prob_[i]; }

  // Full-state index of a simulator state, or nullopt when the state lies
  // outside the enumerated table.
  std::optional<std::size_t> index_of(const NetworkState& state) const;

 private:
  std::uint64_t key(const MiniEndo& e) const;

  SimParams params_;
  std::vector<MiniEndo> endo_;
  std::unordered_map<std::uint64_t, std::uint32_t> endo_index_;
  std::vector<double> exo_prob_;
  std::vector<double> cost_;
  std::vector<std::uint64_t> row_ptr_;
  std::vector<std::uint32_t> succ_;
  std::vector<double> prob_;
};

// Simulator-side view of a state in the miniature's coordinates.
MiniEndo to_mini_endo(const NetworkState& state, const SimParams& params);
MiniExo to_mini_exo(const NetworkState& state, const SimParams& params);
// Builds a simulator state consistent with the given miniature state, with
// the current slot at `slot`.
NetworkState from_mini(const MiniEndo& endo, const MiniExo& exo, const SimParams& params,
                       std::int64_t slot);

struct OracleSolution {
  double gain = 0.0;  // optimal long-run mean AoI
  double gain_lower = 0.0;
  double gain_upper = 0.0;
  std::vector<double> bias;
  std::vector<std::uint8_t> policy;  // action per full state
  int iterations = 0;
  double residual_span = 0.0;
};

struct RviOptions {
  double tol = 1e-9;
  int max_iterations = 500'000;
  double aperiodicity = 0.5;  // h <- h + tau (T h - h)
};

// Relative value iteration; throws std::runtime_error without convergence.
OracleSolution relative_value_iteration(const QuantizedMdp& mdp, const RviOptions& opts = {});
// Single-threaded reference; bitwise identical results.
OracleSolution relative_value_iteration_serial(const QuantizedMdp& mdp, const RviOptions& opts = {});

// Runs the tabular policy in the quantized simulator variant. Throws
// std::runtime_error if a visited state is missing from the table.
RunStats simulate_policy(const QuantizedMdp& mdp, const OracleSolution& solution,
                         std::int64_t slots, std::uint64_t seed);

// Simulator parameters of the quantized variant.
SimParams quantized_params(SimParams params);

}  // namespace aoirelay
