#pragma once

// Experiment orchestration: training with checkpoint caching, the
// (policy x sweep point x seed) evaluation grid, and table output.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aoirelay/agent.hpp"
#include "aoirelay/config.hpp"
#include "aoirelay/oracle.hpp"
#include "aoirelay/simulate.hpp"

namespace aoirelay {

struct ResultRow {
  bool aggregate = false;  // mean over seeds; seed is then absent
  std::string policy;
  std::size_t relays = 0;
  int energy_max = 0;
  std::optional<std::uint64_t> seed;
  std::size_t n_seeds = 1;
  std::int64_t slots = 0;
  double mean_aoi = 0.0;
  // Data rows: batch-means standard error within the run.
  // Aggregate rows: standard error of the per-seed means.
  double mean_aoi_se = 0.0;
  double relay_discard_rate = 0.0;
  double source_drop_rate = 0.0;
  double stale_drop_rate = 0.0;
  double infeasible_rate = 0.0;  // per slot
  double delivered = 0.0;  // count; averaged in aggregate rows
  double generated = 0.0;

  static ResultRow from_run(std::string policy, const SimParams& sim, std::uint64_t seed,
                            const RunStats& run);
};

// Data rows first, then aggregate rows; each block ordered by
// (policy, relays, energy_max, seed).
bool row_less(const ResultRow& a, const ResultRow& b);

// Appends one aggregate row per (policy, relays, energy_max) group.
std::vector<ResultRow> with_aggregates(std::vector<ResultRow> rows);

// --- training and checkpoints ---

// Checkpoint file for the network trained under `sim`; the name carries a
// digest of every setting that influences training.
std::filesystem::path checkpoint_path(const ExperimentConfig& config, const SimParams& sim);

struct TrainingRun {
  SimParams sim;
  TrainReport report;
  std::filesystem::path checkpoint;
};

// Per-episode training trace stored next to a checkpoint.
std::filesystem::path trace_path(const std::filesystem::path& checkpoint);

// Trains, then writes the checkpoint and its trace.
TrainingRun run_training(const ExperimentConfig& config, const SimParams& sim);

// Loads the checkpoint for `sim`, training and saving it first when absent
// and config.auto_train is set. Throws std::runtime_error otherwise.
QNetworkParams obtain_network(const ExperimentConfig& config, const SimParams& sim);

// --- evaluation grid ---

struct CompareOptions {
  bool parallel = true;  // dispatch cells to OpenMP threads
};

// One data row per (policy, sweep point, seed) plus aggregates, sorted.
std::vector<ResultRow> run_compare(const ExperimentConfig& config, const CompareOptions& options = {});

// --- oracle cross-check ---

struct OracleCheck {
  SimParams sim;  // quantized variant
  std::size_t states = 0;
  OracleSolution solution;
  RunStats oracle_run;
  std::vector<std::pair<std::string, RunStats>> heuristics;  // by policy name
};

// Solves the miniature at `sim` and simulates the optimal policy and every
// heuristic in the matching quantized simulator.
OracleCheck run_oracle_check(const SimParams& sim, std::int64_t slots, std::uint64_t seed);
std::string oracle_csv(const OracleCheck& check);

// --- output ---

std::string csv_escape(const std::string& field);
std::string results_csv(const std::vector<ResultRow>& rows);
std::string training_csv(const TrainReport& report);

// Deterministic JSON sidecar: command, config echo, git revision, seeds and
// any extra key/value pairs.
std::string metadata_json(const std::string& command, const ExperimentConfig& config,
                          const std::vector<std::pair<std::string, std::string>>& extra = {});

void write_text(const std::filesystem::path& path, const std::string& text);

const char* git_revision();

}  // namespace aoirelay
