#pragma once

// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls into the code path it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <span>
#include <tuple>
#include <vector>

#include "ofcl/data.hpp"
#include "ofcl/model.hpp"

namespace ofcl::oracle {

// ln(sum(exp(x))) with no shift: exact for moderate inputs.
inline double naive_lse(std::span<const double> x) {
  long double s = 0.0L;
  for (double v : x) s += std::exp(static_cast<long double>(v));
  return static_cast<double>(std::log(s));
}

// Bregman Information evaluated directly from its definition in long double,
// shifting each row by its own maximum (the identity LSE(z) = m + LSE(z - m)).
inline double direct_bi(const std::vector<std::vector<double>>& rows) {
  const std::size_t p = rows.size();
  const std::size_t c = rows.front().size();
  auto lse = [](const std::vector<long double>& z) {
    long double m = *std::max_element(z.begin(), z.end());
    long double s = 0.0L;
    for (long double v : z) s += std::exp(v - m);
    return m + std::log(s);
  };
  long double mean_lse = 0.0L;
  std::vector<long double> mean(c, 0.0L);
  for (const auto& r : rows) {
    std::vector<long double> z(r.begin(), r.end());
    mean_lse += lse(z);
    for (std::size_t j = 0; j < c; ++j) mean[j] += z[j];
  }
  mean_lse /= static_cast<long double>(p);
  for (auto& v : mean) v /= static_cast<long double>(p);
  return static_cast<double>(mean_lse - lse(mean));
}

// Top-two probabilities via a full descending sort.
inline std::pair<double, double> sorted_top_two(std::vector<double> row) {
  std::sort(row.begin(), row.end(), std::greater<>());
  return {row[0], row[1]};
}

inline double lc(const std::vector<std::vector<double>>& rows) {
  double s = 0.0;
  for (const auto& r : rows) s += sorted_top_two(r).first;
  return 1.0 - s / static_cast<double>(rows.size());
}

inline double ms(const std::vector<std::vector<double>>& rows) {
  double s = 0.0;
  for (const auto& r : rows) {
    const auto [a, b] = sorted_top_two(r);
    s += a - b;
  }
  return 1.0 - s / static_cast<double>(rows.size());
}

inline double rc(const std::vector<std::vector<double>>& rows) {
  double s = 0.0;
  for (const auto& r : rows) {
    const auto [a, b] = sorted_top_two(r);
    s += b / a;
  }
  return s / static_cast<double>(rows.size());
}

inline double en(const std::vector<std::vector<double>>& rows) {
  double s = 0.0;
  for (const auto& r : rows) {
    for (double p : r) s += p > 0.0 ? -p * std::log(p) : 0.0;
  }
  return s / static_cast<double>(rows.size());
}

// Forward pass by explicit matrix products over nested vectors.
inline std::vector<double> matrix_forward(const ParameterVector& params, const ModelConfig& config,
                                          const std::vector<double>& x) {
  std::vector<double> a = x;
  std::size_t fan_in = config.input_dim;
  std::vector<std::size_t> widths = config.hidden_dims;
  widths.push_back(config.num_classes);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::size_t fan_out = widths[l];
    std::vector<std::vector<double>> w(fan_out, std::vector<double>(fan_in));
    for (std::size_t r = 0; r < fan_out; ++r) {
      for (std::size_t c = 0; c < fan_in; ++c) w[r][c] = params.values[offset++];
    }
    std::vector<double> b(params.values.begin() + static_cast<long>(offset),
                          params.values.begin() + static_cast<long>(offset + fan_out));
    offset += fan_out;
    std::vector<double> z(fan_out);
    for (std::size_t r = 0; r < fan_out; ++r) {
      long double acc = b[r];
      for (std::size_t c = 0; c < fan_in; ++c) acc += static_cast<long double>(w[r][c]) * a[c];
      z[r] = static_cast<double>(acc);
    }
    if (l + 1 < widths.size()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    a = std::move(z);
    fan_in = fan_out;
  }
  return a;
}

// Mean cross-entropy through the matrix oracle.
inline double oracle_loss(const ParameterVector& params, const ModelConfig& config,
                          const std::vector<LabeledExample>& batch) {
  long double total = 0.0L;
  for (const auto& ex : batch) {
    const auto z = matrix_forward(params, config, ex.features);
    long double m = *std::max_element(z.begin(), z.end());
    long double s = 0.0L;
    for (double v : z) s += std::exp(static_cast<long double>(v) - m);
    total += m + std::log(s) - z[static_cast<std::size_t>(ex.label)];
  }
  return static_cast<double>(total / static_cast<long double>(batch.size()));
}

// Central finite-difference gradient of the oracle loss.
inline std::vector<double> finite_difference_grad(const ParameterVector& params,
                                                  const ModelConfig& config,
                                                  const std::vector<LabeledExample>& batch,
                                                  double h = 1e-5) {
  std::vector<double> g(params.size());
  ParameterVector probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = probe.values[i];
    probe.values[i] = orig + h;
    const double up = oracle_loss(probe, config, batch);
    probe.values[i] = orig - h;
    const double down = oracle_loss(probe, config, batch);
    probe.values[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Relative error with a floor on the scale so that coordinates that are zero in
// both gradients (dead ReLUs) compare as exact.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

// Brute-force BottomK/TopK oracle: remembers every (score, arrival) ever offered
// per class and keeps the best `quota` of the full history.
class SelectionOracle {
 public:
  explicit SelectionOracle(bool lowest) : lowest_(lowest) {}

  void offer(ClassId label, double score, std::uint64_t arrival) {
    history_[label].push_back({score, arrival});
  }

  std::set<std::pair<double, std::uint64_t>> expected(ClassId label, std::size_t quota) const {
    auto all = history_.count(label) ? history_.at(label)
                                     : std::vector<std::pair<double, std::uint64_t>>{};
    std::sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return lowest_ ? a.first < b.first : a.first > b.first;
      return a.second < b.second;
    });
    if (all.size() > quota) all.resize(quota);
    return {all.begin(), all.end()};
  }

 private:
  bool lowest_;
  std::map<ClassId, std::vector<std::pair<double, std::uint64_t>>> history_;
};

// Number of n in (burn_in, batches] with n % q == 0, by enumeration.
inline std::size_t count_rounds(std::size_t batches, std::size_t burn_in, std::size_t q) {
  std::size_t n_rounds = 0;
  for (std::size_t n = 1; n <= batches; ++n) {
    if (n > burn_in && n % q == 0) ++n_rounds;
  }
  return n_rounds;
}

}  // namespace ofcl::oracle
