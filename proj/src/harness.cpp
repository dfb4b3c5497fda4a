#include "aoirelay/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "aoirelay/policies.hpp"
#include "json.hpp"

#ifndef AOIRELAY_GIT_REVISION
#define AOIRELAY_GIT_REVISION "unknown"
#endif

namespace aoirelay {

const char* git_revision() { return AOIRELAY_GIT_REVISION; }

ResultRow ResultRow::from_run(std::string policy, const SimParams& sim, std::uint64_t seed,
                              const RunStats& run) {
  ResultRow r;
  r.policy = std::move(policy);
  r.relays = sim.num_relays;
  r.energy_max = sim.energy_buffer_max;
  r.seed = seed;
  r.slots = run.slots;
  r.mean_aoi = run.mean_aoi;
  r.mean_aoi_se = run.mean_aoi_se;
  r.relay_discard_rate = run.rate(run.relay_discards);
  r.source_drop_rate = run.rate(run.source_drops);
  r.stale_drop_rate = run.rate(run.stale_drops);
  r.infeasible_rate = run.slots > 0 ? static_cast<double>(run.infeasible) / static_cast<double>(run.slots) : 0.0;
  r.delivered = static_cast<double>(run.delivered);
  r.generated = static_cast<double>(run.generated);
  return r;
}

bool row_less(const ResultRow& a, const ResultRow& b) {
  return std::tie(a.aggregate, a.policy, a.relays, a.energy_max, a.seed) <
         std::tie(b.aggregate, b.policy, b.relays, b.energy_max, b.seed);
}

std::vector<ResultRow> with_aggregates(std::vector<ResultRow> rows) {
  std::map<std::tuple<std::string, std::size_t, int>, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) {
    if (!r.aggregate) groups[{r.policy, r.relays, r.energy_max}].push_back(&r);
  }
  std::vector<ResultRow> out = rows;
  for (const auto& [key, members] : groups) {
    ResultRow a;
    a.aggregate = true;
    std::tie(a.policy, a.relays, a.energy_max) = key;
    a.n_seeds = members.size();
    const double n = static_cast<double>(members.size());
    for (const auto* m : members) {
      a.slots += m->slots;
      a.mean_aoi += m->mean_aoi / n;
      a.relay_discard_rate += m->relay_discard_rate / n;
      a.source_drop_rate += m->source_drop_rate / n;
      a.stale_drop_rate += m->stale_drop_rate / n;
      a.infeasible_rate += m->infeasible_rate / n;
      a.delivered += m->delivered / n;
      a.generated += m->generated / n;
    }
    if (members.size() >= 2) {
      double var = 0.0;
      for (const auto* m : members) var += (m->mean_aoi - a.mean_aoi) * (m->mean_aoi - a.mean_aoi);
      a.mean_aoi_se = std::sqrt(var / (n - 1.0) / n);
    }
    out.push_back(std::move(a));
  }
  std::sort(out.begin(), out.end(), row_less);
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// The configuration text that determines a training run at `sim`.
std::string training_identity(const ExperimentConfig& config, const SimParams& sim) {
  ExperimentConfig c;
  c.snr_db = config.snr_db;
  c.power_ratio = config.power_ratio;
  c.sim_base = sim;
  c.train = config.train;
  c.train_seed = config.train_seed;
  return c.serialize();
}

}  // namespace

std::filesystem::path checkpoint_path(const ExperimentConfig& config, const SimParams& sim) {
  char name[96];
  std::snprintf(name, sizeof name, "ddqn_K%zu_E%d_%016llx.qnet", sim.num_relays, sim.energy_buffer_max,
                static_cast<unsigned long long>(fnv1a(training_identity(config, sim))));
  return std::filesystem::path(config.checkpoint_dir) / name;
}

std::filesystem::path trace_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  return p.replace_extension(".csv");
}

TrainingRun run_training(const ExperimentConfig& config, const SimParams& sim) {
  TrainingRun run;
  run.sim = sim;
  run.report = train(sim, config.train, config.train_seed);
  run.checkpoint = checkpoint_path(config, sim);
  std::filesystem::create_directories(run.checkpoint.parent_path());
  // Write then rename so concurrent readers never see a partial file.
  const auto tmp = run.checkpoint.string() + ".tmp";
  save_checkpoint(run.report.params, tmp);
  write_text(trace_path(run.checkpoint), training_csv(run.report));
  std::filesystem::rename(tmp, run.checkpoint);
  return run;
}

QNetworkParams obtain_network(const ExperimentConfig& config, const SimParams& sim) {
  const auto path = checkpoint_path(config, sim);
  if (std::filesystem::exists(path)) return load_checkpoint(path.string());
  if (!config.auto_train) throw std::runtime_error("missing checkpoint " + path.string());
  return run_training(config, sim).report.params;
}

// ---------------------------------------------------------------------------
// Evaluation grid

std::vector<ResultRow> run_compare(const ExperimentConfig& config, const CompareOptions& options) {
  config.validate();
  const auto points = config.sweep_points();

  // Networks are prepared up front so the cells below are pure evaluations.
  std::map<int, QNetworkParams> networks;
  const bool wants_ddqn = std::find(config.policies.begin(), config.policies.end(), "ddqn") != config.policies.end();
  if (wants_ddqn) {
    for (int v : points) networks.emplace(v, obtain_network(config, config.sim_at(v)));
  }

  struct Cell {
    std::string policy;
    int point;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const auto& p : config.policies) {
    for (int v : points) {
      for (auto s : config.seeds) cells.push_back({p, v, s});
    }
  }

  std::vector<ResultRow> rows(cells.size());
  auto run_cell = [&](std::size_t i) {
    const Cell& c = cells[i];
    const SimParams sim = config.sim_at(c.point);
    Controller controller;
    if (c.policy == "ddqn") {
      controller = network_controller(networks.at(c.point), sim, config.mask_infeasible);
    } else {
      const PolicyKind kind = *parse_policy_kind(c.policy);
      controller = [kind, sim](const NetworkState& s, Rng& rng) { return select(kind, s, sim, rng); };
    }
    rows[i] = ResultRow::from_run(c.policy, sim, c.seed, simulate(sim, controller, config.eval_slots, c.seed));
  };

  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(cells.size());
  if (options.parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) run_cell(static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) run_cell(static_cast<std::size_t>(i));
  }
  return with_aggregates(std::move(rows));
}

// ---------------------------------------------------------------------------
// Oracle cross-check

OracleCheck run_oracle_check(const SimParams& sim, std::int64_t slots, std::uint64_t seed) {
  const QuantizedMdp mdp = QuantizedMdp::build(sim);
  OracleCheck check;
  check.sim = mdp.params();
  check.states = mdp.state_count();
  check.solution = relative_value_iteration(mdp);
  check.oracle_run = simulate_policy(mdp, check.solution, slots, seed);
  const SimParams q = mdp.params();
  for (auto kind : {PolicyKind::kMaxLink, PolicyKind::kGreedy, PolicyKind::kDbrsVariant, PolicyKind::kRandom}) {
    Controller c = [kind, q](const NetworkState& s, Rng& rng) { return select(kind, s, q, rng); };
    check.heuristics.emplace_back(std::string(to_string(kind)), simulate(q, c, slots, seed));
  }
  return check;
}

// ---------------------------------------------------------------------------
// Output

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out =
      "row,policy,relays,energy_max,seed,n_seeds,slots,mean_aoi,mean_aoi_se,relay_discard_rate,"
      "source_drop_rate,stale_drop_rate,infeasible_rate,delivered,generated\n";
  for (const auto& r : rows) {
    const std::vector<std::string> fields = {
        r.aggregate ? "aggregate" : "data",
        r.policy,
        std::to_string(r.relays),
        std::to_string(r.energy_max),
        r.seed ? std::to_string(*r.seed) : "",
        std::to_string(r.n_seeds),
        std::to_string(r.slots),
        num(r.mean_aoi),
        num(r.mean_aoi_se),
        num(r.relay_discard_rate),
        num(r.source_drop_rate),
        num(r.stale_drop_rate),
        num(r.infeasible_rate),
        num(r.delivered),
        num(r.generated),
    };
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(fields[i]);
    }
    out += '\n';
  }
  return out;
}

std::string oracle_csv(const OracleCheck& check) {
  std::string out = "policy,relays,energy_max,aoi_max,states,slots,mean_aoi,mean_aoi_se,gain,gain_lower,gain_upper\n";
  const auto& sol = check.solution;
  auto line = [&](const std::string& policy, const RunStats& r) {
    out += csv_escape(policy) + ',' + std::to_string(check.sim.num_relays) + ',' +
           std::to_string(check.sim.energy_buffer_max) + ',' + std::to_string(check.sim.aoi_max) + ',' +
           std::to_string(check.states) + ',' + std::to_string(r.slots) + ',' + num(r.mean_aoi) + ',' +
           num(r.mean_aoi_se) + ',' + num(sol.gain) + ',' + num(sol.gain_lower) + ',' + num(sol.gain_upper) + '\n';
  };
  std::vector<std::pair<std::string, RunStats>> all = check.heuristics;
  all.emplace_back("oracle", check.oracle_run);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [name, r] : all) line(name, r);
  return out;
}

std::string training_csv(const TrainReport& report) {
  std::string out = "episode,mean_loss,mean_aoi,reward_sum\n";
  for (std::size_t e = 0; e < report.mean_aoi.size(); ++e) {
    out += std::to_string(e + 1);
    out += ',';
    if (report.mean_loss[e]) out += num(*report.mean_loss[e]);
    out += ',' + num(report.mean_aoi[e]) + ',' + num(report.reward_sum[e]) + '\n';
  }
  return out;
}

std::string metadata_json(const std::string& command, const ExperimentConfig& config,
                          const std::vector<std::pair<std::string, std::string>>& extra) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["git_revision"] = git_revision();
  j["seeds"] = config.seeds;
  j["train_seed"] = config.train_seed;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  std::istringstream in(config.serialize());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    cfg[line.substr(0, eq)] = line.substr(eq + 3);
  }
  j["config"] = cfg;
  for (const auto& [k, v] : extra) j[k] = v;
  return j.dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace aoirelay
