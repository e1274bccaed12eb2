#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ofcl/data.hpp"
#include "ofcl/model.hpp"

namespace ofcl {

struct CommSchedule {
  std::size_t burn_in = 30;
  std::size_t q = 5;
  friend bool operator==(const CommSchedule&, const CommSchedule&) = default;
};

// True iff bn > burn_in and bn is a multiple of q.
bool should_communicate(std::size_t bn, const CommSchedule& schedule);

enum class AggregationStrategy {
  FedAvg,         // uniform coordinate-wise mean
  ClassWeighted,  // per-class models first, then their uniform mean
  FedProx,        // FedAvg on the server, proximal gradient term on clients
};

std::string_view to_string(AggregationStrategy strategy) noexcept;
AggregationStrategy parse_aggregation(std::string_view text);

// Coordinate-wise (weighted) mean. Inputs are reduced in a canonical order, so the
// result does not depend on the order in which clients are listed.
ParameterVector fedavg(std::span<const ParameterVector> params,
                       std::span<const double> weights = {});

struct RoundReport {
  std::vector<ParameterVector> params;
  // Classes each client observed in its stream since the previous round.
  std::vector<std::set<ClassId>> classes;
};

// Builds one model per reported class (uniform mean of the clients that saw it)
// and returns the uniform mean of those class models. Clients reporting no class
// are left out; with no class reported at all this is plain fedavg.
ParameterVector class_weighted_avg(const RoundReport& report);

struct GlobalState {
  ParameterVector theta_g;
  std::optional<ParameterVector> theta_g_prev;
  std::size_t round = 0;

  // Records `smoothed` as the new global model of the round just completed.
  void advance(const ParameterVector& smoothed);
};

// (theta_new + theta_prev) / 2, or theta_new unchanged when there is no previous round.
ParameterVector temporal_smooth(const ParameterVector& theta_new, const GlobalState& state);

// Overwrites every client's parameters with theta_g. Optimizer state survives
// unless `reset_optimizer` is set.
void broadcast(const ParameterVector& theta_g, std::span<LocalModel> clients,
               bool reset_optimizer = false);

// FNV-1a over the raw parameter bytes.
std::uint64_t checksum(const ParameterVector& params) noexcept;

}  // namespace ofcl
