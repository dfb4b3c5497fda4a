#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "aoirelay/env.hpp"
#include "aoirelay/neuralnet.hpp"
#include "aoirelay/replay.hpp"
#include "aoirelay/rng.hpp"
#include "aoirelay/simulate.hpp"

namespace aoirelay {

enum class OptimizerKind { kSgd, kAdam };

struct TrainConfig {
  int episodes = 1000;
  int steps_per_episode = 2000;
  double discount = 1.0;  // omega
  double step_size = 1e-3;  // mu
  int target_sync = 1000;  // C, in global steps
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;  // of total steps
  double per_alpha = 0.6;
  double per_beta = 0.4;
  double per_zeta = 1e-4;
  std::size_t replay_capacity = 10000;
  std::size_t batch_size = 32;
  std::vector<std::size_t> hidden_dims{80};
  OptimizerKind optimizer = OptimizerKind::kSgd;

  void validate() const;
  // Linear decay from epsilon_start to epsilon_end, then constant.
  double epsilon_at(std::int64_t global_step) const;
  Architecture architecture(const SimParams& params) const;
};

struct TrainReport {
  std::vector<std::optional<double>> mean_loss;  // absent when no update ran
  std::vector<double> mean_aoi;
  std::vector<double> reward_sum;
  QNetworkParams params;
  std::int64_t updates = 0;
  double wall_seconds = 0.0;  // informational only
};

// Lowest index among the maximal entries.
std::size_t argmax(std::span<const double> values);

std::size_t select_action(const QNetworkParams& params, std::span<const double> obs,
                          double epsilon, Rng& rng);

double ddqn_target(double reward, std::span<const double> next_obs, bool terminal,
                   const QNetworkParams& main, const QNetworkParams& target, double omega);

// Owns the main/target networks and the optimizer state of one training run.
class DdqnLearner {
 public:
  DdqnLearner(QNetworkParams initial, const TrainConfig& config);

  // One prioritized minibatch update. Returns the mean unweighted squared
  // TD error of the batch, or nullopt (and no change) when the memory holds
  // fewer than batch_size transitions.
  std::optional<double> train_step(PrioritizedReplay& memory, Rng& rng);
  void sync_target() { target_ = main_; }

  const QNetworkParams& main() const { return main_; }
  const QNetworkParams& target() const { return target_; }
  const GradientSet& last_delta() const { return delta_; }

 private:
  TrainConfig config_;
  QNetworkParams main_;
  QNetworkParams target_;
  Workspace ws_main_;
  Workspace ws_aux_;
  GradientSet delta_;
  std::optional<AdamOptimizer> adam_;
};

struct TrainStepHook {
  std::int64_t global_step = 0;  // steps completed
  const QNetworkParams* main = nullptr;
  const QNetworkParams* target = nullptr;
  const Transition* stored = nullptr;
  const StepOutcome* outcome = nullptr;
};

// Runs episodes x steps_per_episode slots of Algorithm-1 style training.
// Each episode restarts the network from empty data buffers and the
// configured initial energy.
TrainReport train(const SimParams& params, const TrainConfig& config, std::uint64_t seed,
                  const std::function<void(const TrainStepHook&)>& hook = {});

// Greedy controller backed by a network. With masking, the argmax runs over
// feasible actions only (unmasked when none is feasible).
Controller network_controller(const QNetworkParams& params, const SimParams& sim,
                              bool mask_infeasible);

struct EvalStats {
  std::vector<RunStats> runs;  // one per seed
  double mean_aoi = 0.0;
  double mean_aoi_se = 0.0;  // across seeds
  double relay_discard_rate = 0.0;
};

EvalStats summarize(std::vector<RunStats> runs);

EvalStats evaluate(const QNetworkParams& params, const SimParams& sim, std::int64_t slots,
                   std::span<const std::uint64_t> seeds, bool mask_infeasible);

}  // namespace aoirelay
