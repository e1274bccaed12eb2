#include "ofcl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <map>
#include <stdexcept>
#include <thread>

#include "ofcl/error.hpp"
#include "ofcl/federation.hpp"
#include "ofcl/rng.hpp"
#include "ofcl/stream.hpp"
#include "ofcl/uncertainty.hpp"

namespace ofcl {

namespace {

struct Client {
  ClientStream stream;
  LocalModel model;
  MemoryBuffer memory;
  Rng perturb_rng;
  Rng replay_rng;
  std::set<ClassId> classes_since_round;
  std::vector<std::uint64_t> live_ids;
  std::size_t replayed = 0;
  bool task_done = false;
  bool stepped = false;
};

struct Dataset {
  std::vector<LabeledExample> examples;
  std::size_t num_classes = 0;
  std::size_t dim = 0;
};

Dataset build_dataset(const ExperimentConfig& config) {
  Dataset ds;
  if (config.data.source == DataSource::Synthetic) {
    std::vector<std::size_t> sizes = config.data.class_sizes;
    if (sizes.empty()) sizes.assign(config.data.num_classes, config.data.samples_per_class);
    Rng rng = make_stream(config.seed, "data");
    ds.examples = synth_gaussian_blobs(sizes, config.data.dim, config.data.center_spread,
                                       config.data.cluster_sigma, rng);
    ds.num_classes = sizes.size();
    ds.dim = config.data.dim;
    return ds;
  }
  try {
    ds.examples = load_vector_dataset(config.data.path, config.data.format);
  } catch (const DatasetError& e) {
    throw DatasetError(std::string("loading dataset: ") + e.what(), e.record());
  }
  if (ds.examples.empty()) throw DatasetError("dataset '" + config.data.path.string() + "' is empty");
  ClassId max_label = 0;
  for (const LabeledExample& ex : ds.examples) max_label = std::max(max_label, ex.label);
  ds.num_classes = static_cast<std::size_t>(max_label) + 1;
  ds.dim = ds.examples.front().features.size();
  if (ds.num_classes < 2) throw DatasetError("dataset needs at least two classes");
  return ds;
}

// Runs fn(k) for every client index. Work is dealt round-robin over at most
// `threads` workers; each client is touched by exactly one worker.
template <typename F>
void for_each_client(std::size_t num_clients, std::size_t threads, F&& fn) {
  threads = std::clamp<std::size_t>(threads, 1, num_clients);
  if (threads == 1) {
    for (std::size_t k = 0; k < num_clients; ++k) fn(k);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t k = w; k < num_clients; k += threads) fn(k);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::uint64_t seed = config.seed;
  const std::size_t threads = options.threads ? options.threads : config.threads;

  // Data: held-out split, class-to-task assignment, per-client partitions.
  const Dataset ds = build_dataset(config);
  Rng split_rng = make_stream(seed, "split");
  auto [train, test] = split_train_test(ds.examples, config.data.test_fraction, split_rng);

  std::map<ClassId, std::size_t> class_counts;
  for (const LabeledExample& ex : ds.examples) ++class_counts[ex.label];
  std::vector<ClassSize> sizes;
  for (const auto& [id, n] : class_counts) sizes.push_back({id, n});
  Rng task_rng = make_stream(seed, "tasks");
  const auto tasks = assign_classes_to_tasks(sizes, config.data.num_tasks, config.data.assignment,
                                             task_rng);
  const std::size_t num_tasks = tasks.size();

  std::vector<std::vector<LabeledExample>> test_sets(num_tasks);
  std::vector<std::vector<std::vector<LabeledExample>>> per_client(
      config.clients, std::vector<std::vector<LabeledExample>>(num_tasks));
  for (std::size_t t = 0; t < num_tasks; ++t) {
    std::vector<LabeledExample> task_train;
    for (const LabeledExample& ex : train) {
      if (tasks[t].classes.contains(ex.label)) task_train.push_back(ex);
    }
    for (const LabeledExample& ex : test) {
      if (tasks[t].classes.contains(ex.label)) test_sets[t].push_back(ex);
    }
    Rng part_rng = make_stream(seed, "partition", t);
    auto parts = partition_to_clients(std::move(task_train), config.clients, part_rng);
    for (std::size_t k = 0; k < config.clients; ++k) per_client[k][t] = std::move(parts[k]);
  }

  // Model: every client starts from the same initial parameters.
  ModelConfig model_config;
  model_config.input_dim = ds.dim;
  model_config.hidden_dims = config.hidden;
  model_config.num_classes = ds.num_classes;
  model_config.init_seed = seed;
  const ParameterVector initial = init_parameters(model_config);

  GlobalState global;
  global.theta_g = initial;

  std::vector<Client> clients;
  clients.reserve(config.clients);
  for (std::size_t k = 0; k < config.clients; ++k) {
    clients.push_back(Client{
        ClientStream(static_cast<int>(k), std::move(per_client[k]), config.batch_size,
                     make_stream(seed, "order", k)),
        LocalModel{initial, make_optimizer(config.optimizer, config.learning_rate, initial.size())},
        MemoryBuffer(config.memory_capacity, config.memory_policy, make_stream(seed, "memory", k)),
        make_stream(seed, "perturb", k),
        make_stream(seed, "replay", k),
        {},
        {},
        0,
        false,
        false,
    });
  }

  const bool score_memory = config.memory_capacity > 0 && uses_scores(config.memory_policy);
  const bool prox = config.aggregation == AggregationStrategy::FedProx;

  auto train_step = [&](Client& c, MiniBatch& batch, TaskId task) {
    std::vector<LabeledExample> combined = batch.examples;
    if (task > 0) {
      const auto replay = c.memory.sample_replay(config.batch_size, task, c.replay_rng);
      for (const StoredSample& s : replay) combined.push_back(s.as_example());
      c.replayed += replay.size();
    }
    LossAndGrad lg = loss_and_grad(c.model.params, model_config, combined);
    if (prox) {
      lg.grad = fedprox_augment(lg.grad, c.model.params.values, global.theta_g.values,
                                config.fedprox_mu);
    }
    c.model.params = optimizer_step(c.model.params, lg.grad, c.model.optimizer);

    std::set<ClassId> batch_classes;
    for (const LabeledExample& ex : batch.examples) {
      c.live_ids.push_back(ex.id);
      batch_classes.insert(ex.label);
    }
    c.classes_since_round.insert(batch_classes.begin(), batch_classes.end());

    if (config.memory_capacity == 0) return;
    std::vector<double> scores;
    if (score_memory) {
      auto score = [&](std::span<const double> x) {
        return score_sample(c.model.params, model_config, x, config.perturbation, config.metric,
                            c.perturb_rng);
      };
      if (config.rescore_stored) {
        for (ClassId label : batch_classes) {
          c.memory.rescore(label, [&](const StoredSample& s) { return score(s.features); });
        }
      }
      scores.reserve(batch.size());
      for (const LabeledExample& ex : batch.examples) scores.push_back(score(ex.features));
    }
    c.memory.update(batch, scores);
  };

  RunResult result;
  result.config = config;
  result.seed = seed;
  result.matrices.assign(config.clients, AccuracyMatrix(num_tasks));

  for (std::size_t t = 0; t < num_tasks; ++t) {
    const auto task = static_cast<TaskId>(t);
    for (Client& c : clients) c.task_done = false;
    for (std::size_t tick = 1;; ++tick) {
      for_each_client(clients.size(), threads, [&](std::size_t k) {
        Client& c = clients[k];
        c.stepped = false;
        if (c.task_done) return;
        StreamEvent ev = c.stream.next_batch();
        if (auto* batch = std::get_if<MiniBatch>(&ev)) {
          train_step(c, *batch, task);
          c.stepped = true;
        } else {
          c.task_done = true;
        }
      });
      const bool any = std::any_of(clients.begin(), clients.end(),
                                   [](const Client& c) { return c.stepped; });
      if (!any) break;
      if (!should_communicate(tick, config.schedule)) continue;

      RoundReport report;
      for (Client& c : clients) {
        report.params.push_back(c.model.params);
        report.classes.push_back(std::exchange(c.classes_since_round, {}));
      }
      const ParameterVector aggregated = config.aggregation == AggregationStrategy::ClassWeighted
                                             ? class_weighted_avg(report)
                                             : fedavg(report.params);
      const ParameterVector smoothed = temporal_smooth(aggregated, global);
      global.advance(smoothed);
      std::vector<LocalModel> models;
      models.reserve(clients.size());
      for (Client& c : clients) models.push_back(std::move(c.model));
      broadcast(global.theta_g, models, config.reset_optimizer_on_sync);
      for (std::size_t k = 0; k < clients.size(); ++k) clients[k].model = std::move(models[k]);

      result.rounds.push_back(
          {global.round, task, tick, std::move(report.classes), checksum(global.theta_g)});
    }

    for_each_client(clients.size(), threads, [&](std::size_t k) {
      for (std::size_t i = 0; i <= t; ++i) {
        result.matrices[k].record(t, i,
                                  evaluate_model(clients[k].model.params, model_config, test_sets[i]));
      }
    });
  }

  // Single-pass audit.
  std::vector<std::uint64_t> consumed;
  for (Client& c : clients) {
    consumed.insert(consumed.end(), c.live_ids.begin(), c.live_ids.end());
    result.replayed_examples += c.replayed;
  }
  std::vector<std::uint64_t> expected;
  expected.reserve(train.size());
  for (const LabeledExample& ex : train) expected.push_back(ex.id);
  std::sort(consumed.begin(), consumed.end());
  std::sort(expected.begin(), expected.end());
  result.live_examples = consumed.size();
  result.single_pass_ok = consumed == expected;
  if (!result.single_pass_ok) {
    throw std::logic_error("single-pass audit failed: " + std::to_string(consumed.size()) +
                           " live gradient uses for " + std::to_string(expected.size()) +
                           " training examples");
  }

  for (const AccuracyMatrix& m : result.matrices) {
    result.client_A.push_back(last_accuracy(m));
    result.client_F.push_back(last_forgetting(m));
  }
  result.A = avg_last_accuracy(result.matrices);
  result.F = avg_last_forgetting(result.matrices);
  if (options.keep_memory) {
    for (Client& c : clients) result.memories.push_back(std::move(c.memory));
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace ofcl
