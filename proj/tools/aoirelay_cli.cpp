// Command-line front end. Exit codes: 0 success, 1 validation error,
// 2 runtime failure.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "aoirelay/agent.hpp"
#include "aoirelay/config.hpp"
#include "aoirelay/harness.hpp"
#include "aoirelay/neuralnet.hpp"
#include "aoirelay/oracle.hpp"
#include "aoirelay/policies.hpp"
#include "aoirelay/replay.hpp"

namespace fs = std::filesystem;
using namespace aoirelay;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "results";
  std::string policy;
  bool mask = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Configuration file (key = value)");
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--policy", c.policy, "Restrict to one policy");
  cmd->add_flag("--mask-infeasible", c.mask, "Mask infeasible actions when evaluating the network");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  if (c.mask) cfg.mask_infeasible = true;
  if (!c.policy.empty()) {
    if (c.policy != "ddqn" && !parse_policy_kind(c.policy)) {
      throw ConfigError("policy", "unknown policy '" + c.policy + "'");
    }
    cfg.policies = {c.policy == "ddqn" ? c.policy : std::string(to_string(*parse_policy_kind(c.policy)))};
  }
  cfg.validate();
  return cfg;
}

void write_table(const Common& c, const std::string& name, const std::string& command,
                 const ExperimentConfig& cfg, const std::string& csv,
                 const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  const fs::path dir(c.out);
  write_text(dir / (name + ".csv"), csv);
  write_text(dir / (name + ".json"), metadata_json(command, cfg, extra));
  std::cout << "wrote " << (dir / (name + ".csv")).string() << "\n";
}

int cmd_train(const Common& c) {
  ExperimentConfig cfg = load(c);
  if (c.seed) cfg.train_seed = *c.seed;
  for (int v : cfg.sweep_points()) {
    const SimParams sim = cfg.sim_at(v);
    const TrainingRun run = run_training(cfg, sim);
    const std::string name = "train_K" + std::to_string(sim.num_relays) + "_E" + std::to_string(sim.energy_buffer_max);
    write_table(c, name, "train", cfg, training_csv(run.report), {{"checkpoint", run.checkpoint.string()}});
    std::printf("checkpoint %s (%lld updates, %.1f s)\n", run.checkpoint.string().c_str(),
                static_cast<long long>(run.report.updates), run.report.wall_seconds);
  }
  return 0;
}

int cmd_compare(const Common& c, const std::string& command, std::optional<SweepAxis> force_axis,
                std::vector<int> default_values, bool single_policy) {
  ExperimentConfig cfg = load(c);
  if (c.seed) cfg.seeds = {*c.seed};
  if (single_policy && c.policy.empty()) cfg.policies = {"ddqn"};
  if (force_axis) {
    if (cfg.sweep != *force_axis) {
      cfg.sweep = *force_axis;
      cfg.sweep_values = std::move(default_values);
    }
  }
  cfg.validate();
  const auto rows = run_compare(cfg);
  std::string name = command;
  for (auto& ch : name) ch = ch == '-' ? '_' : ch;
  write_table(c, name, command, cfg, results_csv(rows));
  for (const auto& r : rows) {
    if (!r.aggregate) continue;
    std::printf("%-13s K=%zu E=%d  mean AoI %.3f +- %.3f  relay-discard %.4f\n", r.policy.c_str(), r.relays,
                r.energy_max, r.mean_aoi, r.mean_aoi_se, r.relay_discard_rate);
  }
  return 0;
}

int cmd_oracle(const Common& c) {
  ExperimentConfig cfg;
  SimParams sim;
  if (c.config_path.empty()) {
    sim = cfg.sim();
    sim.num_relays = 1;
    sim.energy_buffer_max = 2;
    sim.aoi_max = 10;
  } else {
    cfg = load(c);
    sim = cfg.sim();
  }
  const std::uint64_t seed = c.seed.value_or(1);
  const std::int64_t slots = 1'000'000;
  const OracleCheck check = run_oracle_check(sim, slots, seed);
  cfg.seeds = {seed};
  const double gap = std::abs(check.oracle_run.mean_aoi - check.solution.gain) / check.solution.gain;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", gap);
  write_table(c, "oracle_check", "oracle-check", cfg, oracle_csv(check), {{"relative_gap", buf}});
  std::printf("states %zu  gain %.6f  simulated %.6f (rel. gap %.4f)\n", check.states, check.solution.gain,
              check.oracle_run.mean_aoi, gap);
  bool ok = gap < 0.02;
  for (const auto& [name, r] : check.heuristics) {
    const bool dominated = check.oracle_run.mean_aoi <= r.mean_aoi + 2.0 * std::hypot(check.oracle_run.mean_aoi_se, r.mean_aoi_se);
    ok = ok && dominated;
    std::printf("  %-13s %.4f +- %.4f %s\n", name.c_str(), r.mean_aoi, r.mean_aoi_se, dominated ? "" : "(beats oracle)");
  }
  return ok ? 0 : 2;
}

int cmd_grad_check(const Common& c) {
  const auto report = gradient_check(100, c.seed.value_or(1));
  std::printf("networks %zu  max relative error %.3e\n", report.networks, report.max_rel_error);
  return report.max_rel_error < 1e-4 ? 0 : 2;
}

// Short versions of the invariant checks; the full suites live in tests/.
int cmd_selftest(const Common& c) {
  const std::uint64_t seed = c.seed.value_or(1);
  int failures = 0;
  auto report = [&failures](const char* name, bool ok, const std::string& detail) {
    std::printf("%s %-22s %s\n", ok ? "ok  " : "FAIL", name, detail.c_str());
    failures += ok ? 0 : 1;
  };

  const auto g = gradient_check(20, seed);
  report("gradient", g.max_rel_error < 1e-4, "max rel. error " + std::to_string(g.max_rel_error));

  {
    SimParams p;
    Environment env(p, seed);
    Rng rng = seed_stream(seed, "policy");
    std::int64_t generated = 0, accounted = 0;
    bool bounds = true;
    int prev = env.state().aoi.current;
    for (int n = 0; n < 100'000; ++n) {
      const auto out = env.step(select(PolicyKind::kRandom, env.state(), p, rng));
      const int a = out.info.aoi;
      bounds = bounds && a >= 1 && a <= p.aoi_max && a <= prev + 1;
      prev = a;
      generated += out.info.packets_generated;
      accounted += (out.info.delivered_gen ? 1 : 0) + out.info.relay_discards + out.info.source_drops + out.info.stale_drops;
      for (const auto& r : env.state().relays) {
        bounds = bounds && r.energy >= 0.0 && r.energy <= p.energy_capacity() + 1e-9;
      }
    }
    for (const auto& r : env.state().relays) accounted += r.has_packet ? 1 : 0;
    report("env invariants", bounds, "AoI and energy bounds over 1e5 slots");
    report("packet accounting", generated == accounted,
           std::to_string(generated) + " generated, " + std::to_string(accounted) + " accounted");
  }

  {
    PrioritizedReplay mem(16, 0.6);
    for (int i = 0; i < 16; ++i) {
      const auto slot = mem.push(Transition{});
      mem.update_priority(slot, 0.1 * (i + 1), 0.0);
    }
    Rng rng(seed);
    std::vector<double> counts(16, 0.0);
    const int draws = 100'000;
    for (int i = 0; i < draws; ++i) counts[mem.sample(1, 0.4, rng).indices[0]] += 1.0;
    double worst = 0.0;
    for (int i = 0; i < 16; ++i) worst = std::max(worst, std::abs(counts[i] / draws - mem.probability(i)));
    report("replay frequencies", worst < 0.01, "max abs. deviation " + std::to_string(worst));
  }

  {
    SimParams p;
    p.num_relays = 2;
    p.energy_buffer_max = 2;
    p.aoi_max = 10;
    const auto check = run_oracle_check(p, 200'000, seed);
    const double gap = std::abs(check.oracle_run.mean_aoi - check.solution.gain) / check.solution.gain;
    report("oracle", gap < 0.02, "gain " + std::to_string(check.solution.gain) + ", simulated " +
                                     std::to_string(check.oracle_run.mean_aoi));
  }
  return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relay selection for AoI in energy-harvesting dual-hop networks"};
  app.require_subcommand(1);
  Common common;

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"train", "Train the DDQN agent and write the loss trace"},
      {"eval", "Evaluate one policy (default ddqn)"},
      {"compare", "Evaluate all configured policies"},
      {"sweep-k", "Mean AoI versus the number of relays"},
      {"sweep-emax", "Mean AoI versus the energy buffer size"},
      {"oracle-check", "Solve a quantized miniature exactly and cross-check by simulation"},
      {"grad-check", "Backpropagation versus finite differences"},
      {"selftest", "Quick internal consistency checks"},
  };
  std::map<std::string, CLI::App*> cmds;
  for (const auto& s : subs) {
    cmds[s.name] = app.add_subcommand(s.name, s.help);
    add_common(cmds[s.name], common);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*cmds["train"]) return cmd_train(common);
    if (*cmds["eval"]) return cmd_compare(common, "eval", std::nullopt, {}, true);
    if (*cmds["compare"]) return cmd_compare(common, "compare", std::nullopt, {}, false);
    if (*cmds["sweep-k"]) return cmd_compare(common, "sweep-k", SweepAxis::kRelays, {2, 3, 4, 5}, false);
    if (*cmds["sweep-emax"]) return cmd_compare(common, "sweep-emax", SweepAxis::kEnergyMax, {1, 2, 3, 4}, false);
    if (*cmds["oracle-check"]) return cmd_oracle(common);
    if (*cmds["grad-check"]) return cmd_grad_check(common);
    if (*cmds["selftest"]) return cmd_selftest(common);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
