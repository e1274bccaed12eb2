#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "ofcl/config.hpp"
#include "ofcl/memory.hpp"
#include "ofcl/metrics.hpp"

namespace ofcl {

struct RoundRecord {
  std::size_t round = 0;  // 1-based, counted over the whole experiment
  TaskId task = 0;
  std::size_t tick = 0;   // per-task batch counter at which the round fired
  std::vector<std::set<ClassId>> classes;  // per-client report
  std::uint64_t checksum = 0;              // of the smoothed global parameters
};

struct RunOptions {
  // 0 means "use config.threads". Never changes the results.
  std::size_t threads = 0;
  // Keep each client's final replay memory in RunResult::memories.
  bool keep_memory = false;
};

struct RunResult {
  double A = 0.0;
  double F = 0.0;
  std::vector<double> client_A;
  std::vector<double> client_F;
  std::vector<AccuracyMatrix> matrices;
  std::vector<RoundRecord> rounds;
  double wall_seconds = 0.0;
  ExperimentConfig config;
  std::uint64_t seed = 0;

  // Single-pass audit: every training example fed exactly one gradient step from
  // the live stream. Replayed uses are counted separately.
  bool single_pass_ok = false;
  std::size_t live_examples = 0;
  std::size_t replayed_examples = 0;

  std::vector<MemoryBuffer> memories;
};

// Runs the online federated class-incremental protocol: lockstep ticks over K
// clients, replay from task 2 on, uncertainty-driven memory updates, burn-in/q
// communication rounds with temporal smoothing, and task-boundary evaluation.
// Bit-reproducible for a given config, whatever the thread count.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Exact bytes written to summary.json.
std::string summary_json(const RunResult& result);

// Writes summary.json, per_client.csv, acc_matrix_<k>.csv and rounds.log into
// `dir`. Refuses an existing non-empty directory unless `force` is set.
void emit_report(const RunResult& result, const std::filesystem::path& dir, bool force = false);

}  // namespace ofcl
