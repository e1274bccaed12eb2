#include "ofcl/metrics.hpp"

#include <algorithm>
#include <string>

#include "ofcl/error.hpp"

namespace ofcl {

AccuracyMatrix::AccuracyMatrix(std::size_t num_tasks)
    : num_tasks_(num_tasks), entries_(num_tasks * (num_tasks + 1) / 2) {
  if (num_tasks < 1) throw PreconditionError("AccuracyMatrix: need at least one task");
}

std::size_t AccuracyMatrix::index(std::size_t after_task, std::size_t on_task) const {
  if (after_task >= num_tasks_ || on_task > after_task) {
    throw PreconditionError("AccuracyMatrix: entry (" + std::to_string(after_task) + ", " +
                            std::to_string(on_task) + ") outside the lower triangle");
  }
  return after_task * (after_task + 1) / 2 + on_task;
}

void AccuracyMatrix::record(std::size_t after_task, std::size_t on_task, double accuracy) {
  auto& slot = entries_[index(after_task, on_task)];
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw PreconditionError("AccuracyMatrix: accuracy outside [0, 1]");
  }
  if (slot) {
    throw PreconditionError("AccuracyMatrix: entry (" + std::to_string(after_task) + ", " +
                            std::to_string(on_task) + ") already recorded");
  }
  slot = accuracy;
}

std::optional<double> AccuracyMatrix::get(std::size_t after_task, std::size_t on_task) const {
  return entries_[index(after_task, on_task)];
}

double AccuracyMatrix::at(std::size_t after_task, std::size_t on_task) const {
  const auto v = get(after_task, on_task);
  if (!v) {
    throw PreconditionError("AccuracyMatrix: entry (" + std::to_string(after_task) + ", " +
                            std::to_string(on_task) + ") missing");
  }
  return *v;
}

bool AccuracyMatrix::complete() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const auto& e) { return e.has_value(); });
}

double last_accuracy(const AccuracyMatrix& m) {
  const std::size_t last = m.num_tasks() - 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < m.num_tasks(); ++i) sum += m.at(last, i);
  return sum / static_cast<double>(m.num_tasks());
}

double last_forgetting(const AccuracyMatrix& m) {
  const std::size_t tasks = m.num_tasks();
  if (tasks < 2) throw PreconditionError("last_forgetting: needs at least two tasks");
  const std::size_t last = tasks - 1;
  double sum = 0.0;
  for (std::size_t j = 0; j < last; ++j) {
    double peak = m.at(j, j);
    for (std::size_t l = j + 1; l < last; ++l) peak = std::max(peak, m.at(l, j));
    sum += peak - m.at(last, j);
  }
  return sum / static_cast<double>(last);
}

namespace {

template <typename F>
double client_mean(std::span<const AccuracyMatrix> clients, F&& per_client) {
  if (clients.empty()) throw PreconditionError("metrics: no clients");
  double sum = 0.0;
  for (const AccuracyMatrix& m : clients) {
    if (m.num_tasks() != clients.front().num_tasks()) {
      throw DimensionError("metrics: clients disagree on the number of tasks");
    }
    sum += per_client(m);
  }
  return sum / static_cast<double>(clients.size());
}

}  // namespace

double avg_last_accuracy(std::span<const AccuracyMatrix> clients) {
  return client_mean(clients, [](const AccuracyMatrix& m) { return last_accuracy(m); });
}

double avg_last_forgetting(std::span<const AccuracyMatrix> clients) {
  return client_mean(clients, [](const AccuracyMatrix& m) { return last_forgetting(m); });
}

std::size_t predict(const ParameterVector& params, const ModelConfig& config,
                    std::span<const double> features) {
  const auto z = forward_logits(params, config, features);
  // max_element returns the first maximum, i.e. the lowest class id on ties.
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

double evaluate_model(const ParameterVector& params, const ModelConfig& config,
                      std::span<const LabeledExample> test_set) {
  if (test_set.empty()) throw PreconditionError("evaluate_model: empty test set");
  std::size_t correct = 0;
  for (const LabeledExample& ex : test_set) {
    if (predict(params, config, ex.features) == static_cast<std::size_t>(ex.label)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

}  // namespace ofcl
