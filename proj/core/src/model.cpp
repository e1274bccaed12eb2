#include "ofcl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ofcl/error.hpp"
#include "ofcl/rng.hpp"

namespace ofcl {

void ModelConfig::validate() const {
  if (input_dim < 1) throw PreconditionError("model.input_dim must be >= 1");
  if (num_classes < 2) throw PreconditionError("model.num_classes must be >= 2");
  for (std::size_t h : hidden_dims) {
    if (h < 1) throw PreconditionError("model.hidden_dims entries must be >= 1");
  }
}

std::size_t Layout::total_size() const noexcept {
  std::size_t n = 0;
  for (const Block& b : blocks) n += b.size();
  return n;
}

Layout make_layout(const ModelConfig& config) {
  config.validate();
  Layout layout;
  std::size_t offset = 0;
  std::size_t fan_in = config.input_dim;
  auto add_layer = [&](std::size_t fan_out) {
    layout.blocks.push_back({fan_out, fan_in, offset});
    offset += fan_out * fan_in;
    layout.blocks.push_back({fan_out, 1, offset});
    offset += fan_out;
    fan_in = fan_out;
  };
  for (std::size_t h : config.hidden_dims) add_layer(h);
  add_layer(config.num_classes);
  return layout;
}

ParameterVector::ParameterVector(std::vector<double> v, Layout l)
    : values(std::move(v)), layout(std::move(l)) {
  if (values.size() != layout.total_size()) {
    throw DimensionError("parameter vector length " + std::to_string(values.size()) +
                         " does not match layout size " + std::to_string(layout.total_size()));
  }
}

std::span<const double> ParameterVector::block(std::size_t i) const {
  const Block& b = layout.blocks.at(i);
  return std::span<const double>(values).subspan(b.offset, b.size());
}

std::span<double> ParameterVector::block(std::size_t i) {
  const Block& b = layout.blocks.at(i);
  return std::span<double>(values).subspan(b.offset, b.size());
}

ParameterVector zeros_like(const Layout& layout) {
  return ParameterVector(std::vector<double>(layout.total_size(), 0.0), layout);
}

OptimizerState make_optimizer(OptimizerKind kind, double learning_rate, std::size_t num_params) {
  if (!(learning_rate > 0.0)) throw PreconditionError("optimizer learning_rate must be > 0");
  OptimizerState s;
  s.kind = kind;
  s.learning_rate = learning_rate;
  if (kind == OptimizerKind::Adam) {
    s.adam_m.assign(num_params, 0.0);
    s.adam_v.assign(num_params, 0.0);
  }
  return s;
}

ParameterVector init_parameters(const ModelConfig& config) {
  ParameterVector params = zeros_like(make_layout(config));
  Rng rng = make_stream(config.init_seed, "init");
  for (std::size_t i = 0; i < params.layout.blocks.size(); i += 2) {
    const Block& w = params.layout.blocks[i];
    const double s = std::sqrt(6.0 / static_cast<double>(w.cols + w.rows));
    std::uniform_real_distribution<double> dist(-s, s);
    for (double& x : params.block(i)) {
      do {
        x = dist(rng);
      } while (x == -s);  // keep the interval open
    }
  }
  return params;
}

namespace {

void check_compatible(const ParameterVector& params, const ModelConfig& config) {
  if (params.layout != make_layout(config)) {
    throw DimensionError("parameter layout does not match model config");
  }
}

// out = W x + b for a rows x cols row-major W.
void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            std::span<double> out) {
  const std::size_t rows = b.size();
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    double acc = b[r];
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

// Activations of every layer for one input; acts[0] is the input, acts.back() the logits.
std::vector<std::vector<double>> forward_all(const ParameterVector& params,
                                             const ModelConfig& config,
                                             std::span<const double> features) {
  std::vector<std::vector<double>> acts;
  acts.reserve(config.num_layers() + 1);
  acts.emplace_back(features.begin(), features.end());
  for (std::size_t l = 0; l < config.num_layers(); ++l) {
    const Block& wb = params.layout.blocks[2 * l];
    std::vector<double> out(wb.rows);
    affine(params.block(2 * l), params.block(2 * l + 1), acts.back(), out);
    if (l + 1 < config.num_layers()) {
      for (double& v : out) v = std::max(v, 0.0);
    }
    acts.push_back(std::move(out));
  }
  return acts;
}

bool canonical_less(const LabeledExample& a, const LabeledExample& b) {
  if (a.label != b.label) return a.label < b.label;
  return std::lexicographical_compare(a.features.begin(), a.features.end(), b.features.begin(),
                                      b.features.end());
}

bool same_sample(const LabeledExample& a, const LabeledExample& b) {
  return a.label == b.label && a.features == b.features;
}

}  // namespace

std::vector<double> forward_logits(const ParameterVector& params, const ModelConfig& config,
                                   std::span<const double> features) {
  if (features.size() != config.input_dim) {
    throw DimensionError("feature length " + std::to_string(features.size()) +
                         " does not match input_dim " + std::to_string(config.input_dim));
  }
  check_compatible(params, config);
  return std::move(forward_all(params, config, features).back());
}

LossAndGrad loss_and_grad(const ParameterVector& params, const ModelConfig& config,
                          std::span<const LabeledExample> batch) {
  if (batch.empty()) throw PreconditionError("loss_and_grad: empty batch");
  check_compatible(params, config);
  for (const LabeledExample& ex : batch) {
    if (ex.features.size() != config.input_dim) {
      throw DimensionError("loss_and_grad: feature length does not match input_dim");
    }
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= config.num_classes) {
      throw PreconditionError("loss_and_grad: label " + std::to_string(ex.label) +
                              " outside [0, num_classes)");
    }
  }

  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return canonical_less(batch[a], batch[b]);
  });

  LossAndGrad out;
  out.grad.assign(params.size(), 0.0);
  const std::size_t layers = config.num_layers();

  for (std::size_t pos = 0; pos < order.size();) {
    const LabeledExample& ex = batch[order[pos]];
    std::size_t run = 1;
    while (pos + run < order.size() && same_sample(batch[order[pos + run]], ex)) ++run;
    pos += run;
    const double mult = static_cast<double>(run);

    const auto acts = forward_all(params, config, ex.features);
    const std::vector<double>& z = acts.back();
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    out.loss += mult * (lse - z[static_cast<std::size_t>(ex.label)]);

    // dL/dz = softmax(z) - onehot(label), scaled by the sample's multiplicity.
    std::vector<double> delta(z.size());
    for (std::size_t c = 0; c < z.size(); ++c) delta[c] = mult * std::exp(z[c] - lse);
    delta[static_cast<std::size_t>(ex.label)] -= mult;

    for (std::size_t l = layers; l-- > 0;) {
      const Block& wb = params.layout.blocks[2 * l];
      const Block& bb = params.layout.blocks[2 * l + 1];
      const std::vector<double>& in = acts[l];
      for (std::size_t r = 0; r < wb.rows; ++r) {
        double* grow = out.grad.data() + wb.offset + r * wb.cols;
        for (std::size_t c = 0; c < wb.cols; ++c) grow[c] += delta[r] * in[c];
        out.grad[bb.offset + r] += delta[r];
      }
      if (l == 0) break;
      const std::span<const double> w = params.block(2 * l);
      std::vector<double> prev(wb.cols, 0.0);
      for (std::size_t r = 0; r < wb.rows; ++r) {
        const double* row = w.data() + r * wb.cols;
        for (std::size_t c = 0; c < wb.cols; ++c) prev[c] += row[c] * delta[r];
      }
      // ReLU derivative, taken as 0 at the kink.
      for (std::size_t c = 0; c < wb.cols; ++c) {
        if (!(in[c] > 0.0)) prev[c] = 0.0;
      }
      delta = std::move(prev);
    }
  }

  const double n = static_cast<double>(batch.size());
  out.loss /= n;
  for (double& g : out.grad) g /= n;
  return out;
}

LossAndGrad loss_and_grad(const ParameterVector& params, const ModelConfig& config,
                          const MiniBatch& batch) {
  return loss_and_grad(params, config, std::span<const LabeledExample>(batch.examples));
}

std::vector<double> fedprox_augment(std::span<const double> grad, std::span<const double> params,
                                    std::span<const double> global_params, double mu) {
  if (grad.size() != params.size() || params.size() != global_params.size()) {
    throw DimensionError("fedprox_augment: length mismatch");
  }
  if (!(mu >= 0.0)) throw PreconditionError("fedprox_augment: mu must be >= 0");
  std::vector<double> out(grad.begin(), grad.end());
  if (mu == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += mu * (params[i] - global_params[i]);
  return out;
}

ParameterVector optimizer_step(const ParameterVector& params, std::span<const double> grad,
                               OptimizerState& state) {
  if (grad.size() != params.size()) throw DimensionError("optimizer_step: length mismatch");
  ParameterVector next = params;
  const double lr = state.learning_rate;
  switch (state.kind) {
    case OptimizerKind::SGD:
      for (std::size_t i = 0; i < grad.size(); ++i) next.values[i] -= lr * grad[i];
      break;
    case OptimizerKind::Adam: {
      if (state.adam_m.size() != grad.size() || state.adam_v.size() != grad.size()) {
        throw DimensionError("optimizer_step: Adam state length mismatch");
      }
      ++state.adam_t;
      const double t = static_cast<double>(state.adam_t);
      const double b1 = state.adam_beta1;
      const double b2 = state.adam_beta2;
      const double c1 = 1.0 - std::pow(b1, t);
      const double c2 = 1.0 - std::pow(b2, t);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        state.adam_m[i] = b1 * state.adam_m[i] + (1.0 - b1) * grad[i];
        state.adam_v[i] = b2 * state.adam_v[i] + (1.0 - b2) * grad[i] * grad[i];
        const double m_hat = state.adam_m[i] / c1;
        const double v_hat = state.adam_v[i] / c2;
        next.values[i] -= lr * m_hat / (std::sqrt(v_hat) + state.adam_eps);
      }
      break;
    }
  }
  return next;
}

}  // namespace ofcl
