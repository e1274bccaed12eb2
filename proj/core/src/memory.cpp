#include "ofcl/memory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <ostream>
#include <string>

#include "ofcl/error.hpp"

namespace ofcl {

std::string_view to_string(MemoryPolicy policy) noexcept {
  switch (policy) {
    case MemoryPolicy::BottomK: return "bottomk";
    case MemoryPolicy::TopK: return "topk";
    case MemoryPolicy::Random: return "random";
    case MemoryPolicy::ClassBalancedRandom: return "class_balanced_random";
  }
  return "?";
}

MemoryPolicy parse_memory_policy(std::string_view text) {
  for (MemoryPolicy p : {MemoryPolicy::BottomK, MemoryPolicy::TopK, MemoryPolicy::Random,
                         MemoryPolicy::ClassBalancedRandom}) {
    if (text == to_string(p)) return p;
  }
  throw PreconditionError("unknown memory policy '" + std::string(text) + "'");
}

bool uses_scores(MemoryPolicy policy) noexcept {
  return policy == MemoryPolicy::BottomK || policy == MemoryPolicy::TopK;
}

std::map<ClassId, std::size_t> class_quota(std::size_t capacity, const std::set<ClassId>& classes) {
  if (classes.empty()) throw PreconditionError("class_quota: no classes");
  const std::size_t n = classes.size();
  const std::size_t base = capacity / n;
  std::size_t extra = capacity % n;
  std::map<ClassId, std::size_t> quota;
  for (ClassId c : classes) {  // std::set iterates in ascending id order
    quota[c] = base + (extra > 0 ? 1 : 0);
    if (extra > 0) --extra;
  }
  return quota;
}

MemoryBuffer::MemoryBuffer(std::size_t capacity, MemoryPolicy policy, Rng rng)
    : capacity_(capacity), policy_(policy), rng_(std::move(rng)) {}

std::size_t MemoryBuffer::size() const noexcept {
  std::size_t n = 0;
  for (const auto& [label, samples] : per_class_) n += samples.size();
  return n;
}

std::size_t MemoryBuffer::count(ClassId label) const {
  const auto it = per_class_.find(label);
  return it == per_class_.end() ? 0 : it->second.size();
}

std::vector<StoredSample> MemoryBuffer::retain(std::vector<StoredSample> candidates,
                                               std::size_t keep) {
  if (candidates.size() <= keep) return candidates;
  std::vector<StoredSample> kept;
  kept.reserve(keep);
  switch (policy_) {
    case MemoryPolicy::BottomK:
    case MemoryPolicy::TopK: {
      const bool lowest = policy_ == MemoryPolicy::BottomK;
      std::sort(candidates.begin(), candidates.end(),
                [lowest](const StoredSample& a, const StoredSample& b) {
                  if (a.score != b.score) return lowest ? a.score < b.score : a.score > b.score;
                  return a.arrival < b.arrival;
                });
      candidates.resize(keep);
      kept = std::move(candidates);
      std::sort(kept.begin(), kept.end(), [](const StoredSample& a, const StoredSample& b) {
        return a.arrival < b.arrival;
      });
      break;
    }
    case MemoryPolicy::Random:
    case MemoryPolicy::ClassBalancedRandom:
      std::sample(std::make_move_iterator(candidates.begin()),
                  std::make_move_iterator(candidates.end()), std::back_inserter(kept), keep, rng_);
      break;
  }
  return kept;
}

void MemoryBuffer::update(const MiniBatch& batch, std::span<const double> scores) {
  const bool need_scores = uses_scores(policy_);
  if (scores.size() != batch.size() && (need_scores || !scores.empty())) {
    throw DimensionError("update_memory: " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(batch.size()) + " samples");
  }
  std::map<ClassId, std::vector<StoredSample>> incoming;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const LabeledExample& ex = batch.examples[i];
    if (ex.label < 0) throw PreconditionError("update_memory: negative label");
    const double score = scores.empty() ? 0.0 : scores[i];
    if (!std::isfinite(score)) throw PreconditionError("update_memory: non-finite score");
    incoming[ex.label].push_back(
        {ex.features, ex.label, batch.task_id, score, next_arrival_++, ex.id});
    classes_seen_.insert(ex.label);
  }
  if (incoming.empty()) return;

  if (policy_ == MemoryPolicy::Random) {
    std::vector<StoredSample> pool;
    for (auto& [label, samples] : per_class_) {
      std::move(samples.begin(), samples.end(), std::back_inserter(pool));
    }
    for (auto& [label, samples] : incoming) {
      std::move(samples.begin(), samples.end(), std::back_inserter(pool));
    }
    std::sort(pool.begin(), pool.end(), [](const StoredSample& a, const StoredSample& b) {
      return a.arrival < b.arrival;
    });
    per_class_.clear();
    for (StoredSample& s : retain(std::move(pool), capacity_)) {
      per_class_[s.label].push_back(std::move(s));
    }
    return;
  }

  const auto quota = class_quota(capacity_, classes_seen_);
  for (auto& [label, fresh] : incoming) {
    std::vector<StoredSample>& stored = per_class_[label];
    std::vector<StoredSample> candidates = std::move(stored);
    std::move(fresh.begin(), fresh.end(), std::back_inserter(candidates));
    stored = retain(std::move(candidates), quota.at(label));
  }
  // Classes untouched by this batch may now exceed a shrunken quota.
  for (auto& [label, stored] : per_class_) {
    if (incoming.contains(label)) continue;
    stored = retain(std::move(stored), quota.at(label));
  }
  std::erase_if(per_class_, [](const auto& kv) { return kv.second.empty(); });
}

void MemoryBuffer::rescore(ClassId label, const Scorer& scorer) {
  const auto it = per_class_.find(label);
  if (it == per_class_.end()) return;
  for (StoredSample& s : it->second) {
    s.score = scorer(s);
    if (!std::isfinite(s.score)) throw PreconditionError("rescore: non-finite score");
  }
}

std::vector<StoredSample> MemoryBuffer::sample_replay(std::size_t replay_size,
                                                      TaskId current_task, Rng& rng) const {
  if (replay_size < 1) throw PreconditionError("sample_replay: replay_size must be >= 1");
  std::vector<const StoredSample*> eligible;
  for (const auto& [label, samples] : per_class_) {
    for (const StoredSample& s : samples) {
      if (s.task_id != current_task) eligible.push_back(&s);
    }
  }
  std::vector<const StoredSample*> chosen;
  if (eligible.size() <= replay_size) {
    chosen = std::move(eligible);
  } else {
    std::sample(eligible.begin(), eligible.end(), std::back_inserter(chosen), replay_size, rng);
  }
  std::vector<StoredSample> out;
  out.reserve(chosen.size());
  for (const StoredSample* s : chosen) out.push_back(*s);
  return out;
}

void MemoryBuffer::write_csv(std::ostream& out) const {
  std::size_t dim = 0;
  for (const auto& [label, samples] : per_class_) {
    if (!samples.empty()) dim = samples.front().features.size();
  }
  out << "class_id,task_id,score";
  for (std::size_t j = 0; j < dim; ++j) out << ",f" << j;
  out << '\n';
  char buf[32];
  for (const auto& [label, samples] : per_class_) {
    for (const StoredSample& s : samples) {
      std::snprintf(buf, sizeof buf, "%.17g", s.score);
      out << s.label << ',' << s.task_id << ',' << buf;
      for (double v : s.features) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

}  // namespace ofcl
