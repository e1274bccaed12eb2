#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ofcl/data.hpp"
#include "ofcl/model.hpp"

namespace ofcl {

// Lower-triangular accuracy record of one client: entry (t, i) is the accuracy
// on task i measured after training on task t, for 0 <= i <= t < num_tasks.
// Entries are write-once.
class AccuracyMatrix {
 public:
  explicit AccuracyMatrix(std::size_t num_tasks);

  void record(std::size_t after_task, std::size_t on_task, double accuracy);
  std::optional<double> get(std::size_t after_task, std::size_t on_task) const;
  // Throws PreconditionError when the entry has not been recorded.
  double at(std::size_t after_task, std::size_t on_task) const;

  std::size_t num_tasks() const noexcept { return num_tasks_; }
  bool complete() const;

 private:
  std::size_t index(std::size_t after_task, std::size_t on_task) const;

  std::size_t num_tasks_;
  std::vector<std::optional<double>> entries_;
};

// A_k: mean accuracy over all tasks after the final task.
double last_accuracy(const AccuracyMatrix& m);
// F_k: mean over past tasks j of (peak accuracy over evaluations j..T-2) minus the
// final accuracy on j. Not clamped, so backward transfer shows up as negative.
double last_forgetting(const AccuracyMatrix& m);

double avg_last_accuracy(std::span<const AccuracyMatrix> clients);
double avg_last_forgetting(std::span<const AccuracyMatrix> clients);

// Fraction of argmax-correct predictions; argmax ties go to the lowest class id.
double evaluate_model(const ParameterVector& params, const ModelConfig& config,
                      std::span<const LabeledExample> test_set);

std::size_t predict(const ParameterVector& params, const ModelConfig& config,
                    std::span<const double> features);

}  // namespace ofcl
