#include "ofcl/federation.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "ofcl/error.hpp"
#include "ofcl/rng.hpp"

namespace ofcl {

bool should_communicate(std::size_t bn, const CommSchedule& schedule) {
  if (schedule.q < 1) throw PreconditionError("should_communicate: q must be >= 1");
  return bn > schedule.burn_in && bn % schedule.q == 0;
}

std::string_view to_string(AggregationStrategy strategy) noexcept {
  switch (strategy) {
    case AggregationStrategy::FedAvg: return "fedavg";
    case AggregationStrategy::ClassWeighted: return "weighted";
    case AggregationStrategy::FedProx: return "fedprox";
  }
  return "?";
}

AggregationStrategy parse_aggregation(std::string_view text) {
  for (AggregationStrategy s : {AggregationStrategy::FedAvg, AggregationStrategy::ClassWeighted,
                                AggregationStrategy::FedProx}) {
    if (text == to_string(s)) return s;
  }
  throw PreconditionError("unknown aggregation strategy '" + std::string(text) + "'");
}

namespace {

void check_layouts(std::span<const ParameterVector> params) {
  if (params.empty()) throw PreconditionError("aggregation over zero clients");
  for (const ParameterVector& p : params) {
    if (p.layout != params.front().layout || p.size() != params.front().size()) {
      throw DimensionError("aggregation: parameter layouts differ between clients");
    }
  }
}

}  // namespace

ParameterVector fedavg(std::span<const ParameterVector> params, std::span<const double> weights) {
  check_layouts(params);
  const bool weighted = !weights.empty();
  if (weighted && weights.size() != params.size()) {
    throw DimensionError("fedavg: one weight per client required");
  }
  std::vector<std::size_t> order(params.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& va = params[a].values;
    const auto& vb = params[b].values;
    if (va != vb) return std::lexicographical_compare(va.begin(), va.end(), vb.begin(), vb.end());
    return weighted && weights[a] < weights[b];
  });

  ParameterVector out = zeros_like(params.front().layout);
  double total = 0.0;
  for (std::size_t idx : order) {
    const double w = weighted ? weights[idx] : 1.0;
    if (!(w >= 0.0)) throw PreconditionError("fedavg: weights must be >= 0");
    total += w;
    const auto& v = params[idx].values;
    if (weighted) {
      for (std::size_t i = 0; i < v.size(); ++i) out.values[i] += w * v[i];
    } else {
      for (std::size_t i = 0; i < v.size(); ++i) out.values[i] += v[i];
    }
  }
  if (!(total > 0.0)) throw PreconditionError("fedavg: weights sum to zero");
  for (double& x : out.values) x /= total;
  return out;
}

ParameterVector class_weighted_avg(const RoundReport& report) {
  check_layouts(report.params);
  if (report.classes.size() != report.params.size()) {
    throw DimensionError("class_weighted_avg: one class report per client required");
  }
  std::map<ClassId, std::vector<std::size_t>> contributors;
  for (std::size_t k = 0; k < report.classes.size(); ++k) {
    for (ClassId c : report.classes[k]) contributors[c].push_back(k);
  }
  if (contributors.empty()) return fedavg(report.params);

  // Classes seen by the same set of clients share one class model, so each
  // distinct set is averaged once and weighted by how many classes it covers.
  std::map<std::vector<std::size_t>, double> groups;
  for (const auto& [c, clients] : contributors) groups[clients] += 1.0;

  std::vector<ParameterVector> models;
  std::vector<double> weights;
  for (const auto& [clients, n_classes] : groups) {
    std::vector<ParameterVector> members;
    members.reserve(clients.size());
    for (std::size_t k : clients) members.push_back(report.params[k]);
    models.push_back(fedavg(members));
    weights.push_back(n_classes);
  }
  if (models.size() == 1) return std::move(models.front());
  return fedavg(models, weights);
}

void GlobalState::advance(const ParameterVector& smoothed) {
  theta_g = smoothed;
  theta_g_prev = smoothed;
  ++round;
}

ParameterVector temporal_smooth(const ParameterVector& theta_new, const GlobalState& state) {
  if (!state.theta_g_prev) return theta_new;
  const ParameterVector& prev = *state.theta_g_prev;
  if (prev.layout != theta_new.layout) throw DimensionError("temporal_smooth: layout mismatch");
  ParameterVector out = theta_new;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    out.values[i] = (theta_new.values[i] + prev.values[i]) / 2.0;
  }
  return out;
}

void broadcast(const ParameterVector& theta_g, std::span<LocalModel> clients,
               bool reset_optimizer) {
  for (const LocalModel& c : clients) {
    if (c.params.layout != theta_g.layout) throw DimensionError("broadcast: layout mismatch");
  }
  for (LocalModel& c : clients) {
    c.params = theta_g;
    if (reset_optimizer) {
      c.optimizer = make_optimizer(c.optimizer.kind, c.optimizer.learning_rate, theta_g.size());
    }
  }
}

std::uint64_t checksum(const ParameterVector& params) noexcept {
  return fnv1a(params.values.data(), params.values.size() * sizeof(double));
}

}  // namespace ofcl
