#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "ofcl/model.hpp"
#include "ofcl/rng.hpp"

namespace ofcl {

// Row-major P x C matrix: one row per perturbed copy of a sample.
class LogitSet {
 public:
  // Throws PreconditionError unless P >= 1, C >= 2, size == P*C and all entries are finite.
  LogitSet(std::vector<double> values, std::size_t rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t i) const;
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
  std::size_t rows_;
  std::size_t cols_;
};

// Row-major P x C matrix of class probabilities; every row sums to 1 within 1e-9.
class ProbabilitySet {
 public:
  ProbabilitySet(std::vector<double> values, std::size_t rows, std::size_t cols);

  // Row-wise softmax with max subtraction.
  static ProbabilitySet softmax(const LogitSet& logits);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t i) const;

 private:
  std::vector<double> values_;
  std::size_t rows_;
  std::size_t cols_;
};

// ln(sum(exp(x))) evaluated as max(x) + ln(sum(exp(x - max(x)))).
double stable_lse(std::span<const double> x);

// Bregman Information of the cross-entropy over P perturbations: mean of the
// per-row LSE minus the LSE of the mean logit vector. Values within 1e-12 below
// zero (rounding) are clamped to 0.
double bregman_information(const LogitSet& logits);

// Baseline confidence scores, each averaged over the P rows.
double least_confidence(const ProbabilitySet& probs);  // 1 - mean top-1
double margin_sampling(const ProbabilitySet& probs);   // 1 - mean(top1 - top2)
double ratio_confidence(const ProbabilitySet& probs);  // mean(top2 / top1)
double entropy_score(const ProbabilitySet& probs);     // mean Shannon entropy, 0 ln 0 = 0

struct GaussianNoise {
  double sigma = 0.1;
  friend bool operator==(const GaussianNoise&, const GaussianNoise&) = default;
};

struct ElementMask {
  double fraction = 0.2;
  friend bool operator==(const ElementMask&, const ElementMask&) = default;
};

struct PerturbationSpec {
  std::size_t count = 12;
  std::variant<GaussianNoise, ElementMask> kind = GaussianNoise{};

  void validate() const;
  friend bool operator==(const PerturbationSpec&, const PerturbationSpec&) = default;
};

// P perturbed copies of x. Gaussian: x + N(0, sigma^2) per coordinate.
// Mask: floor(fraction * dim) coordinates, chosen independently per copy, set to 0.
std::vector<std::vector<double>> perturb_features(std::span<const double> x,
                                                  const PerturbationSpec& spec, Rng& rng);

enum class ScoreMetric { BI, LC, MS, RC, EN };

std::string_view to_string(ScoreMetric metric) noexcept;
ScoreMetric parse_score_metric(std::string_view text);

// Forwards each perturbed copy through the model and stacks the logits.
LogitSet perturbed_logits(const ParameterVector& params, const ModelConfig& config,
                          std::span<const double> x, const PerturbationSpec& spec, Rng& rng);

double score_logits(const LogitSet& logits, ScoreMetric metric);

// Test-time-augmentation uncertainty of one unlabeled sample under the model.
double score_sample(const ParameterVector& params, const ModelConfig& config,
                    std::span<const double> x, const PerturbationSpec& spec, ScoreMetric metric,
                    Rng& rng);

}  // namespace ofcl
