#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "ofcl/data.hpp"
#include "ofcl/rng.hpp"

namespace ofcl {

struct StoredSample {
  std::vector<double> features;
  ClassId label = 0;
  TaskId task_id = 0;
  double score = 0.0;
  // Order in which the sample was offered to this buffer; breaks score ties.
  std::uint64_t arrival = 0;
  std::uint64_t source_id = 0;

  LabeledExample as_example() const { return {features, label, source_id}; }
};

enum class MemoryPolicy {
  BottomK,              // per class, keep the lowest-scored candidates
  TopK,                 // per class, keep the highest-scored candidates
  Random,               // uniform subset of everything offered, no class quotas
  ClassBalancedRandom,  // per class, uniform subset within the quota
};

std::string_view to_string(MemoryPolicy policy) noexcept;
MemoryPolicy parse_memory_policy(std::string_view text);
bool uses_scores(MemoryPolicy policy) noexcept;

// Splits `capacity` evenly over `classes`; the first (capacity mod n) classes in
// ascending id order receive one extra slot. Quotas always sum to capacity.
std::map<ClassId, std::size_t> class_quota(std::size_t capacity, const std::set<ClassId>& classes);

// Fixed-capacity replay memory owned by one client.
class MemoryBuffer {
 public:
  using Scorer = std::function<double(const StoredSample&)>;

  // `rng` drives the Random and ClassBalancedRandom retention draws.
  MemoryBuffer(std::size_t capacity, MemoryPolicy policy, Rng rng = Rng{});

  // Offers the batch to the memory. `scores[i]` belongs to batch.examples[i];
  // it may be empty for policies that ignore scores.
  void update(const MiniBatch& batch, std::span<const double> scores);

  // Overwrites the stored score of every sample of class `label`.
  void rescore(ClassId label, const Scorer& scorer);

  // Uniform draw without replacement of min(replay_size, eligible) samples whose
  // task differs from `current_task`.
  std::vector<StoredSample> sample_replay(std::size_t replay_size, TaskId current_task,
                                          Rng& rng) const;

  std::size_t size() const noexcept;
  std::size_t capacity() const noexcept { return capacity_; }
  MemoryPolicy policy() const noexcept { return policy_; }
  const std::set<ClassId>& classes_seen() const noexcept { return classes_seen_; }
  const std::map<ClassId, std::vector<StoredSample>>& per_class() const noexcept {
    return per_class_;
  }
  std::size_t count(ClassId label) const;

  // CSV snapshot: class_id,task_id,score,f0,...,f{d-1}; one row per stored sample.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<StoredSample> retain(std::vector<StoredSample> candidates, std::size_t keep);

  std::size_t capacity_;
  MemoryPolicy policy_;
  Rng rng_;
  std::uint64_t next_arrival_ = 0;
  std::set<ClassId> classes_seen_;
  std::map<ClassId, std::vector<StoredSample>> per_class_;
};

}  // namespace ofcl
