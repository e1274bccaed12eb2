#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ofcl/data.hpp"

namespace ofcl {

enum class Activation { ReLU };

struct ModelConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;
  std::size_t num_classes = 2;
  Activation activation = Activation::ReLU;
  std::uint64_t init_seed = 0;

  // Throws PreconditionError naming the offending field.
  void validate() const;
  std::size_t num_layers() const noexcept { return hidden_dims.size() + 1; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// One dense block inside a flat parameter vector: a rows x cols row-major matrix
// (cols == 1 for bias vectors) starting at `offset`.
struct Block {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;

  std::size_t size() const noexcept { return rows * cols; }
  friend bool operator==(const Block&, const Block&) = default;
};

// Ordered weight/bias blocks: W0, b0, W1, b1, ... with W_l of shape out x in.
struct Layout {
  std::vector<Block> blocks;

  std::size_t total_size() const noexcept;
  friend bool operator==(const Layout&, const Layout&) = default;
};

Layout make_layout(const ModelConfig& config);

// Flat model weights plus the layout they follow; the unit exchanged between
// clients and the server.
struct ParameterVector {
  std::vector<double> values;
  Layout layout;

  ParameterVector() = default;
  ParameterVector(std::vector<double> v, Layout l);

  std::size_t size() const noexcept { return values.size(); }
  std::span<const double> block(std::size_t i) const;
  std::span<double> block(std::size_t i);

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;
};

// Zero vector with the given layout.
ParameterVector zeros_like(const Layout& layout);

enum class OptimizerKind { SGD, Adam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::SGD;
  double learning_rate = 0.1;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::uint64_t adam_t = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

// Adam moment arrays are allocated (zeroed) iff kind == Adam.
OptimizerState make_optimizer(OptimizerKind kind, double learning_rate, std::size_t num_params);

// Glorot-uniform weights in (-s, s), s = sqrt(6 / (fan_in + fan_out)); zero biases.
ParameterVector init_parameters(const ModelConfig& config);

std::vector<double> forward_logits(const ParameterVector& params, const ModelConfig& config,
                                   std::span<const double> features);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Mean softmax cross-entropy over the batch and its gradient.
//
// Samples are accumulated in a canonical order (label, then features) with
// exact duplicates merged into a multiplicity, so the result is bit-identical
// under any reordering of the batch and under duplicating every sample.
LossAndGrad loss_and_grad(const ParameterVector& params, const ModelConfig& config,
                          std::span<const LabeledExample> batch);
LossAndGrad loss_and_grad(const ParameterVector& params, const ModelConfig& config,
                          const MiniBatch& batch);

// grad + mu * (params - global_params): the gradient of the FedProx proximal term
// (mu / 2) * ||params - global||^2 added to the loss gradient.
std::vector<double> fedprox_augment(std::span<const double> grad, std::span<const double> params,
                                    std::span<const double> global_params, double mu);

ParameterVector optimizer_step(const ParameterVector& params, std::span<const double> grad,
                               OptimizerState& state);

// A client's model instance: parameters and the optimizer state that trains them.
struct LocalModel {
  ParameterVector params;
  OptimizerState optimizer;
};

}  // namespace ofcl
