#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "ofcl/data.hpp"
#include "ofcl/rng.hpp"

namespace ofcl {

struct ClassSize {
  ClassId id = 0;
  std::size_t size = 0;
};

struct TaskSpec {
  TaskId task_id = 0;
  std::set<ClassId> classes;
};

enum class TaskAssignment { RandomShuffle, SizeDescending };

std::string_view to_string(TaskAssignment mode) noexcept;
TaskAssignment parse_task_assignment(std::string_view text);

// Splits the classes into `num_tasks` disjoint groups. RandomShuffle permutes the
// classes with `rng`; SizeDescending orders them by sample count (largest first,
// ties by id) so earlier tasks hold the larger classes. When the class count is
// not a multiple of `num_tasks`, the earliest tasks take one extra class.
std::vector<TaskSpec> assign_classes_to_tasks(std::vector<ClassSize> classes,
                                              std::size_t num_tasks, TaskAssignment mode,
                                              Rng& rng);

// Seeded shuffle followed by a round-robin deal into `num_clients` disjoint lists.
std::vector<std::vector<LabeledExample>> partition_to_clients(std::vector<LabeledExample> data,
                                                              std::size_t num_clients, Rng& rng);

// Stratified split: per class, round(fraction * n) shuffled examples go to the test side.
std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_train_test(
    const std::vector<LabeledExample>& data, double test_fraction, Rng& rng);

struct EndOfTask {};
struct EndOfStream {};
using StreamEvent = std::variant<MiniBatch, EndOfTask, EndOfStream>;

// Single-pass mini-batch iterator over one client's task sequence.
class ClientStream {
 public:
  // Each task's examples are shuffled once with `order_rng`, then cut into
  // batches of `batch_size`; the final short batch is kept.
  ClientStream(int client_id, std::vector<std::vector<LabeledExample>> per_task,
               std::size_t batch_size, Rng order_rng);

  // Next batch of the current task, EndOfTask once the task is exhausted (and the
  // cursor moves to the next task), or EndOfStream after the last task.
  StreamEvent next_batch();

  int client_id() const noexcept { return client_id_; }
  TaskId current_task() const noexcept { return static_cast<TaskId>(task_); }
  // Batches consumed in the current task (bn); reset at every task boundary.
  std::size_t batches_consumed() const noexcept { return bn_; }
  std::size_t num_tasks() const noexcept { return batches_.size(); }
  std::size_t batches_in_task(std::size_t task) const { return batches_.at(task).size(); }

 private:
  int client_id_;
  std::vector<std::vector<MiniBatch>> batches_;
  std::size_t task_ = 0;
  std::size_t bn_ = 0;
};

// Class c ~ N(mu_c, cluster_sigma^2 I) with mu_c ~ N(0, center_spread^2 I). Labels are
// 0..n-1 in the order of `class_sizes`; example ids number the output sequentially.
std::vector<LabeledExample> synth_gaussian_blobs(std::span<const std::size_t> class_sizes,
                                                 std::size_t dim, double center_spread,
                                                 double cluster_sigma, Rng& rng);

// Per-class means drawn by synth_gaussian_blobs for the same generator state.
std::vector<std::vector<double>> blob_centers(std::size_t num_classes, std::size_t dim,
                                              double center_spread, Rng& rng);

enum class DatasetFormat { Csv, Binary };

std::string_view to_string(DatasetFormat format) noexcept;
DatasetFormat parse_dataset_format(std::string_view text);

// CSV: one `label,f1,...,fd` row per example.
// Binary: u32 count, u32 dim, then per record a u32 label followed by dim
// float32 values, all little-endian.
std::vector<LabeledExample> load_vector_dataset(const std::filesystem::path& path,
                                                DatasetFormat format);
void save_vector_dataset(const std::filesystem::path& path, DatasetFormat format,
                         std::span<const LabeledExample> examples);

}  // namespace ofcl
