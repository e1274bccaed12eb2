#pragma once

#include <cstdint>
#include <vector>

namespace ofcl {

using ClassId = int;
using TaskId = int;

struct LabeledExample {
  std::vector<double> features;
  ClassId label = 0;
  // Position of the example in its source dataset; used for the single-pass audit.
  std::uint64_t id = 0;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

struct MiniBatch {
  std::vector<LabeledExample> examples;
  TaskId task_id = 0;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
};

}  // namespace ofcl
