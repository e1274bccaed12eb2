#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ofcl/federation.hpp"
#include "ofcl/memory.hpp"
#include "ofcl/model.hpp"
#include "ofcl/stream.hpp"
#include "ofcl/uncertainty.hpp"

namespace ofcl {

enum class DataSource { Synthetic, File };

struct DataConfig {
  DataSource source = DataSource::Synthetic;
  std::filesystem::path path;
  DatasetFormat format = DatasetFormat::Csv;
  // Synthetic Gaussian blobs.
  std::size_t num_classes = 8;
  std::size_t samples_per_class = 400;
  std::vector<std::size_t> class_sizes;  // overrides samples_per_class when non-empty
  std::size_t dim = 16;
  double center_spread = 3.0;
  double cluster_sigma = 1.0;

  std::size_t num_tasks = 4;
  TaskAssignment assignment = TaskAssignment::RandomShuffle;
  double test_fraction = 0.2;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct ExperimentConfig {
  DataConfig data;

  std::size_t clients = 5;
  std::size_t batch_size = 10;
  CommSchedule schedule;  // burn_in = 30, q = 5
  AggregationStrategy aggregation = AggregationStrategy::FedAvg;
  double fedprox_mu = 0.01;
  bool reset_optimizer_on_sync = false;

  std::size_t memory_capacity = 100;
  MemoryPolicy memory_policy = MemoryPolicy::BottomK;
  ScoreMetric metric = ScoreMetric::BI;
  // Re-score already stored samples of a class whenever that class is updated.
  bool rescore_stored = true;
  PerturbationSpec perturbation;  // 12 copies, Gaussian sigma 0.1

  std::vector<std::size_t> hidden = {64};
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 0.01;

  std::uint64_t seed = 1;
  // Execution-only settings; they never influence results.
  std::size_t threads = 1;
  std::filesystem::path output_dir = "ofcl_out";

  // Throws ConfigError naming the offending field.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// INI-style text: `[section]` headers, `key = value` lines, `#` or `;` comment
// lines. Every key name is unique across sections, so headers are optional; when
// present the key must belong to the enclosing section. Unknown keys and bad
// values raise ConfigError carrying the line number and field name.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

// Canonical text form; parse_config_text(format_config(c)) == c.
std::string format_config(const ExperimentConfig& config);

std::string_view to_string(OptimizerKind kind) noexcept;

}  // namespace ofcl
