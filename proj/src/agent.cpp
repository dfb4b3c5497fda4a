#include "aoirelay/agent.hpp"

#include <chrono>
#include <memory>
#include <cmath>
#include <stdexcept>

namespace aoirelay {

void TrainConfig::validate() const {
  auto fail = [](const char* key, const char* what) {
    throw std::invalid_argument(std::string(key) + ": " + what);
  };
  if (episodes < 1) fail("episodes", "must be >= 1");
  if (steps_per_episode < 1) fail("steps", "must be >= 1");
  if (!(discount >= 0.0 && discount <= 1.0)) fail("discount", "must lie in [0, 1]");
  if (!(step_size >= 0.0) || !std::isfinite(step_size)) fail("step_size", "must be finite and >= 0");
  if (target_sync < 1) fail("target_sync", "must be >= 1");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) fail("epsilon_start", "must lie in [0, 1]");
  if (!(epsilon_end >= 0.0 && epsilon_end <= 1.0)) fail("epsilon_end", "must lie in [0, 1]");
  if (!(epsilon_decay_fraction >= 0.0 && epsilon_decay_fraction <= 1.0)) {
    fail("epsilon_decay", "must lie in [0, 1]");
  }
  if (!(per_alpha >= 0.0)) fail("per_alpha", "must be >= 0");
  if (!(per_beta >= 0.0)) fail("per_beta", "must be >= 0");
  if (!(per_zeta > 0.0)) fail("per_zeta", "must be > 0");
  if (replay_capacity < 1) fail("replay_capacity", "must be >= 1");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (batch_size > replay_capacity) fail("batch_size", "must not exceed replay_capacity");
  for (auto h : hidden_dims) if (h < 1) fail("hidden", "layer widths must be >= 1");
}

double TrainConfig::epsilon_at(std::int64_t global_step) const {
  const double total = static_cast<double>(episodes) * steps_per_episode;
  const double decay_steps = epsilon_decay_fraction * total;
  if (decay_steps <= 0.0) return epsilon_end;
  const double frac = std::min(1.0, static_cast<double>(global_step) / decay_steps);
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

Architecture TrainConfig::architecture(const SimParams& params) const {
  Architecture a;
  a.input_dim = params.observation_dim();
  a.hidden_dims = hidden_dims;
  a.output_dim = params.action_count();
  return a;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t select_action(const QNetworkParams& params, std::span<const double> obs,
                          double epsilon, Rng& rng) {
  // Draw the exploration coin first so the stream advances identically
  // regardless of the network output.
  if (rng.uniform() < epsilon) return rng.uniform_index(params.arch.output_dim);
  const auto q = forward(params, obs);
  return argmax(q);
}

double ddqn_target(double reward, std::span<const double> next_obs, bool terminal,
                   const QNetworkParams& main, const QNetworkParams& target, double omega) {
  if (terminal || omega == 0.0) return reward;
  const auto q_main = forward(main, next_obs);
  const auto q_target = forward(target, next_obs);
  return reward + omega * q_target[argmax(q_main)];
}

// ---------------------------------------------------------------------------

DdqnLearner::DdqnLearner(QNetworkParams initial, const TrainConfig& config)
    : config_(config),
      main_(std::move(initial)),
      target_(main_),
      ws_main_(main_.arch),
      ws_aux_(main_.arch),
      delta_(GradientSet::zeros_like(main_)) {
  if (config_.optimizer == OptimizerKind::kAdam) adam_.emplace(main_);
}

std::optional<double> DdqnLearner::train_step(PrioritizedReplay& memory, Rng& rng) {
  const std::size_t m = config_.batch_size;
  if (memory.size() < m) return std::nullopt;
  const SampleBatch batch = memory.sample(m, config_.per_beta, rng);

  delta_.set_zero();
  double loss_sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t idx = batch.indices[j];
    const Transition& t = memory.at(idx);

    double y = t.reward;
    if (!t.terminal && config_.discount != 0.0) {
      const auto q_next_main = ws_aux_.forward(main_, t.next_state);
      const std::size_t a_star = argmax(q_next_main);
      const double q_hat = ws_aux_.forward(target_, t.next_state)[a_star];
      y += config_.discount * q_hat;
    }

    const double q = ws_main_.forward(main_, t.state)[t.action];
    const LossTerm term = weighted_td_loss(q, y, batch.weights[j]);
    loss_sum += term.loss;
    memory.update_priority(idx, term.loss, config_.per_zeta);
    // delta accumulates the negative weighted gradient.
    ws_main_.backward_accumulate(main_, t.state, t.action, term.grad, -1.0, delta_);
  }

  if (adam_) {
    adam_->apply(main_, delta_, config_.step_size);
  } else {
    apply_update(main_, delta_, config_.step_size);
  }
  return loss_sum / static_cast<double>(m);
}

// ---------------------------------------------------------------------------

TrainReport train(const SimParams& params, const TrainConfig& config, std::uint64_t seed,
                  const std::function<void(const TrainStepHook&)>& hook) {
  params.validate();
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();

  Rng init_rng = seed_stream(seed, "init");
  Rng explore_rng = seed_stream(seed, "explore");
  Rng replay_rng = seed_stream(seed, "replay");
  Environment env(params, derive_seed(seed, "env"));

  DdqnLearner learner(init_network(config.architecture(params), init_rng), config);
  PrioritizedReplay memory(config.replay_capacity, config.per_alpha);

  TrainReport report;
  std::int64_t global_step = 0;
  for (int ep = 0; ep < config.episodes; ++ep) {
    env.reset();
    std::vector<double> obs = env.observe();
    double loss_sum = 0.0;
    int loss_count = 0;
    double aoi_sum = 0.0;
    double reward_sum = 0.0;
    for (int n = 1; n <= config.steps_per_episode; ++n) {
      const double eps = config.epsilon_at(global_step);
      const std::size_t a = select_action(learner.main(), obs, eps, explore_rng);
      const StepOutcome out = env.step(a);
      std::vector<double> next_obs = env.observe();

      Transition t{obs, a, out.reward, next_obs, n == config.steps_per_episode};
      const std::size_t slot = memory.push(std::move(t));

      if (auto loss = learner.train_step(memory, replay_rng)) {
        loss_sum += *loss;
        ++loss_count;
        ++report.updates;
      }
      ++global_step;
      if (global_step % config.target_sync == 0) learner.sync_target();

      if (hook) {
        TrainStepHook info{global_step, &learner.main(), &learner.target(), &memory.at(slot), &out};
        hook(info);
      }
      aoi_sum += out.info.aoi;
      reward_sum += out.reward;
      obs = std::move(next_obs);
    }
    report.mean_loss.push_back(loss_count > 0 ? std::optional<double>(loss_sum / loss_count)
                                              : std::nullopt);
    report.mean_aoi.push_back(aoi_sum / config.steps_per_episode);
    report.reward_sum.push_back(reward_sum);
  }
  report.params = learner.main();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// ---------------------------------------------------------------------------

Controller network_controller(const QNetworkParams& params, const SimParams& sim,
                              bool mask_infeasible) {
  auto ws = std::make_shared<Workspace>(params.arch);
  auto obs = std::make_shared<std::vector<double>>(sim.observation_dim());
  return [params, sim, mask_infeasible, ws, obs](const NetworkState& state, Rng&) -> Decision {
    observe_into(state, sim, *obs);
    const auto q = ws->forward(params, *obs);
    const std::size_t K = sim.num_relays;
    if (mask_infeasible) {
      std::optional<std::size_t> best;
      for (std::size_t i = 0; i < q.size(); ++i) {
        if (check_feasible(state, action_from_index(i, K), sim) != Violation::kNone) continue;
        if (!best || q[i] > q[*best]) best = i;
      }
      if (best) return action_from_index(*best, K);
    }
    return action_from_index(argmax(q), K);
  };
}

EvalStats summarize(std::vector<RunStats> runs) {
  EvalStats e;
  e.runs = std::move(runs);
  const double n = static_cast<double>(e.runs.size());
  if (e.runs.empty()) return e;
  for (const auto& r : e.runs) {
    e.mean_aoi += r.mean_aoi / n;
    e.relay_discard_rate += r.rate(r.relay_discards) / n;
  }
  if (e.runs.size() >= 2) {
    double var = 0.0;
    for (const auto& r : e.runs) var += (r.mean_aoi - e.mean_aoi) * (r.mean_aoi - e.mean_aoi);
    var /= n - 1.0;
    e.mean_aoi_se = std::sqrt(var / n);
  }
  return e;
}

EvalStats evaluate(const QNetworkParams& params, const SimParams& sim, std::int64_t slots,
                   std::span<const std::uint64_t> seeds, bool mask_infeasible) {
  std::vector<RunStats> runs;
  runs.reserve(seeds.size());
  for (auto seed : seeds) {
    runs.push_back(simulate(sim, network_controller(params, sim, mask_infeasible), slots, seed));
  }
  return summarize(std::move(runs));
}

}  // namespace aoirelay
