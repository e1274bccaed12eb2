#include "ofcl/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ofcl/error.hpp"

namespace ofcl {

namespace {

constexpr double kClampTolerance = 1e-12;
constexpr double kRowSumTolerance = 1e-9;

void check_shape(std::size_t size, std::size_t rows, std::size_t cols, const char* what) {
  if (rows < 1) throw PreconditionError(std::string(what) + ": need at least one row");
  if (cols < 2) throw PreconditionError(std::string(what) + ": need at least two classes");
  if (size != rows * cols) throw DimensionError(std::string(what) + ": size != rows * cols");
}

// Largest and second largest entries of a row (C >= 2).
std::pair<double, double> top_two(std::span<const double> row) {
  double first = row[0];
  double second = row[1];
  if (second > first) std::swap(first, second);
  for (std::size_t j = 2; j < row.size(); ++j) {
    if (row[j] > first) {
      second = first;
      first = row[j];
    } else if (row[j] > second) {
      second = row[j];
    }
  }
  return {first, second};
}

}  // namespace

LogitSet::LogitSet(std::vector<double> values, std::size_t rows, std::size_t cols)
    : values_(std::move(values)), rows_(rows), cols_(cols) {
  check_shape(values_.size(), rows_, cols_, "LogitSet");
  for (double v : values_) {
    if (!std::isfinite(v)) throw PreconditionError("LogitSet: non-finite logit");
  }
}

std::span<const double> LogitSet::row(std::size_t i) const {
  return std::span<const double>(values_).subspan(i * cols_, cols_);
}

ProbabilitySet::ProbabilitySet(std::vector<double> values, std::size_t rows, std::size_t cols)
    : values_(std::move(values)), rows_(rows), cols_(cols) {
  check_shape(values_.size(), rows_, cols_, "ProbabilitySet");
  for (std::size_t i = 0; i < rows_; ++i) {
    double sum = 0.0;
    for (double p : row(i)) {
      if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("ProbabilitySet: entry outside [0, 1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw PreconditionError("ProbabilitySet: row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

ProbabilitySet ProbabilitySet::softmax(const LogitSet& logits) {
  std::vector<double> out(logits.rows() * logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    const double lse = stable_lse(z);
    for (std::size_t j = 0; j < z.size(); ++j) out[i * z.size() + j] = std::exp(z[j] - lse);
  }
  return ProbabilitySet(std::move(out), logits.rows(), logits.cols());
}

std::span<const double> ProbabilitySet::row(std::size_t i) const {
  return std::span<const double>(values_).subspan(i * cols_, cols_);
}

double stable_lse(std::span<const double> x) {
  if (x.empty()) throw PreconditionError("stable_lse: empty input");
  const double m = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - m);
  return m + std::log(sum);
}

double bregman_information(const LogitSet& logits) {
  const std::size_t p = logits.rows();
  const std::size_t c = logits.cols();
  const double inv_p = 1.0 / static_cast<double>(p);
  // Both means are taken as deviations from the first row, so identical rows
  // give exactly zero instead of a few ulps of rounding.
  const auto first = logits.row(0);
  const double first_lse = stable_lse(first);
  double lse_dev = 0.0;
  std::vector<double> logit_dev(c, 0.0);
  for (std::size_t i = 1; i < p; ++i) {
    const auto z = logits.row(i);
    lse_dev += stable_lse(z) - first_lse;
    for (std::size_t j = 0; j < c; ++j) logit_dev[j] += z[j] - first[j];
  }
  std::vector<double> mean_logits(c);
  for (std::size_t j = 0; j < c; ++j) mean_logits[j] = first[j] + logit_dev[j] * inv_p;
  const double bi = (first_lse - stable_lse(mean_logits)) + lse_dev * inv_p;
  if (bi < 0.0 && bi >= -kClampTolerance) return 0.0;
  return bi;
}

double least_confidence(const ProbabilitySet& probs) {
  double top = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) top += top_two(probs.row(i)).first;
  return 1.0 - top / static_cast<double>(probs.rows());
}

double margin_sampling(const ProbabilitySet& probs) {
  double margin = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto [first, second] = top_two(probs.row(i));
    margin += first - second;
  }
  return 1.0 - margin / static_cast<double>(probs.rows());
}

double ratio_confidence(const ProbabilitySet& probs) {
  double ratio = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto [first, second] = top_two(probs.row(i));
    if (!(first > 0.0)) throw PreconditionError("ratio_confidence: zero top probability");
    ratio += second / first;
  }
  return ratio / static_cast<double>(probs.rows());
}

double entropy_score(const ProbabilitySet& probs) {
  double total = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    for (double p : probs.row(i)) {
      if (p > 0.0) total -= p * std::log(p);
    }
  }
  return total / static_cast<double>(probs.rows());
}

void PerturbationSpec::validate() const {
  if (count < 1) throw PreconditionError("perturbation.count must be >= 1");
  if (const auto* g = std::get_if<GaussianNoise>(&kind)) {
    if (!(g->sigma > 0.0)) throw PreconditionError("perturbation.sigma must be > 0");
  } else if (const auto* m = std::get_if<ElementMask>(&kind)) {
    if (!(m->fraction >= 0.0 && m->fraction < 1.0)) {
      throw PreconditionError("perturbation.mask_fraction must be in [0, 1)");
    }
  }
}

std::vector<std::vector<double>> perturb_features(std::span<const double> x,
                                                  const PerturbationSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<std::vector<double>> copies(spec.count, std::vector<double>(x.begin(), x.end()));
  if (const auto* g = std::get_if<GaussianNoise>(&spec.kind)) {
    std::normal_distribution<double> noise(0.0, g->sigma);
    for (auto& copy : copies) {
      for (double& v : copy) v += noise(rng);
    }
  } else {
    const auto& m = std::get<ElementMask>(spec.kind);
    const auto masked = static_cast<std::size_t>(m.fraction * static_cast<double>(x.size()));
    std::vector<std::size_t> idx(x.size());
    for (auto& copy : copies) {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      // Partial Fisher-Yates: the first `masked` slots become a uniform subset.
      for (std::size_t k = 0; k < masked; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
        std::swap(idx[k], idx[pick(rng)]);
        copy[idx[k]] = 0.0;
      }
    }
  }
  return copies;
}

std::string_view to_string(ScoreMetric metric) noexcept {
  switch (metric) {
    case ScoreMetric::BI: return "bi";
    case ScoreMetric::LC: return "lc";
    case ScoreMetric::MS: return "ms";
    case ScoreMetric::RC: return "rc";
    case ScoreMetric::EN: return "en";
  }
  return "?";
}

ScoreMetric parse_score_metric(std::string_view text) {
  for (ScoreMetric m : {ScoreMetric::BI, ScoreMetric::LC, ScoreMetric::MS, ScoreMetric::RC,
                        ScoreMetric::EN}) {
    if (text == to_string(m)) return m;
  }
  throw PreconditionError("unknown uncertainty metric '" + std::string(text) + "'");
}

LogitSet perturbed_logits(const ParameterVector& params, const ModelConfig& config,
                          std::span<const double> x, const PerturbationSpec& spec, Rng& rng) {
  const auto copies = perturb_features(x, spec, rng);
  std::vector<double> values;
  values.reserve(copies.size() * config.num_classes);
  for (const auto& copy : copies) {
    const auto z = forward_logits(params, config, copy);
    values.insert(values.end(), z.begin(), z.end());
  }
  return LogitSet(std::move(values), copies.size(), config.num_classes);
}

double score_logits(const LogitSet& logits, ScoreMetric metric) {
  if (metric == ScoreMetric::BI) return bregman_information(logits);
  const ProbabilitySet probs = ProbabilitySet::softmax(logits);
  switch (metric) {
    case ScoreMetric::LC: return least_confidence(probs);
    case ScoreMetric::MS: return margin_sampling(probs);
    case ScoreMetric::RC: return ratio_confidence(probs);
    case ScoreMetric::EN: return entropy_score(probs);
    case ScoreMetric::BI: break;
  }
  return bregman_information(logits);
}

double score_sample(const ParameterVector& params, const ModelConfig& config,
                    std::span<const double> x, const PerturbationSpec& spec, ScoreMetric metric,
                    Rng& rng) {
  return score_logits(perturbed_logits(params, config, x, spec, rng), metric);
}

}  // namespace ofcl
