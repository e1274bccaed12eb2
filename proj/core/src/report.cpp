#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "ofcl/experiment.hpp"

namespace ofcl {

namespace {

using Json = nlohmann::ordered_json;

Json config_echo(const ExperimentConfig& c) {
  Json data = {
      {"source", c.data.source == DataSource::File ? "file" : "synthetic"},
  };
  if (c.data.source == DataSource::File) {
    data["path"] = c.data.path.string();
    data["format"] = std::string(to_string(c.data.format));
  } else {
    data["num_classes"] = c.data.num_classes;
    data["samples_per_class"] = c.data.samples_per_class;
    data["class_sizes"] = c.data.class_sizes;
    data["dim"] = c.data.dim;
    data["center_spread"] = c.data.center_spread;
    data["cluster_sigma"] = c.data.cluster_sigma;
  }
  data["tasks"] = c.data.num_tasks;
  data["task_assignment"] = std::string(to_string(c.data.assignment));
  data["test_fraction"] = c.data.test_fraction;

  Json perturbation = {{"count", c.perturbation.count}};
  if (const auto* g = std::get_if<GaussianNoise>(&c.perturbation.kind)) {
    perturbation["kind"] = "gaussian";
    perturbation["sigma"] = g->sigma;
  } else {
    perturbation["kind"] = "mask";
    perturbation["mask_fraction"] = std::get<ElementMask>(c.perturbation.kind).fraction;
  }

  return Json{
      {"data", data},
      {"federation",
       {{"clients", c.clients},
        {"batch_size", c.batch_size},
        {"burn_in", c.schedule.burn_in},
        {"q", c.schedule.q},
        {"aggregation", std::string(to_string(c.aggregation))},
        {"fedprox_mu", c.fedprox_mu},
        {"reset_optimizer_on_sync", c.reset_optimizer_on_sync}}},
      {"memory",
       {{"capacity", c.memory_capacity},
        {"policy", std::string(to_string(c.memory_policy))},
        {"metric", std::string(to_string(c.metric))},
        {"rescore_stored", c.rescore_stored}}},
      {"perturbation", perturbation},
      {"model",
       {{"hidden", c.hidden},
        {"optimizer", std::string(to_string(c.optimizer))},
        {"learning_rate", c.learning_rate}}},
  };
}

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

}  // namespace

std::string summary_json(const RunResult& result) {
  Json per_client = Json::array();
  for (std::size_t k = 0; k < result.client_A.size(); ++k) {
    per_client.push_back({{"client", k}, {"A", result.client_A[k]}, {"F", result.client_F[k]}});
  }
  const Json summary = {
      {"A", result.A},
      {"F", result.F},
      {"seed", result.seed},
      {"config", config_echo(result.config)},
      {"per_client", per_client},
      {"rounds", result.rounds.size()},
      {"single_pass_audit",
       {{"passed", result.single_pass_ok},
        {"live_examples", result.live_examples},
        {"replayed_examples", result.replayed_examples}}},
  };
  return summary.dump(2) + "\n";
}

void emit_report(const RunResult& result, const std::filesystem::path& dir, bool force) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec)) {
      throw std::runtime_error("output path '" + dir.string() + "' is not a directory");
    }
    if (!fs::is_empty(dir, ec) && !force) {
      throw std::runtime_error("output directory '" + dir.string() +
                               "' is not empty (use --force to overwrite)");
    }
  }
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());

  write_file(dir / "summary.json", summary_json(result));

  std::string per_client = "client,A_k,F_k\n";
  for (std::size_t k = 0; k < result.client_A.size(); ++k) {
    per_client += std::to_string(k) + ',' + fmt_real(result.client_A[k]) + ',' +
                  fmt_real(result.client_F[k]) + '\n';
  }
  write_file(dir / "per_client.csv", per_client);

  for (std::size_t k = 0; k < result.matrices.size(); ++k) {
    const AccuracyMatrix& m = result.matrices[k];
    std::string csv = "after_task";
    for (std::size_t i = 0; i < m.num_tasks(); ++i) csv += ",task_" + std::to_string(i);
    csv += '\n';
    for (std::size_t t = 0; t < m.num_tasks(); ++t) {
      csv += std::to_string(t);
      for (std::size_t i = 0; i < m.num_tasks(); ++i) {
        csv += ',';
        if (i <= t) {
          if (const auto v = m.get(t, i)) csv += fmt_real(*v);
        }
      }
      csv += '\n';
    }
    write_file(dir / ("acc_matrix_" + std::to_string(k) + ".csv"), csv);
  }

  std::string log;
  for (const RoundRecord& r : result.rounds) {
    char head[128];
    std::snprintf(head, sizeof head, "round=%zu task=%d tick=%zu checksum=%016" PRIx64 " classes=",
                  r.round, r.task, r.tick, r.checksum);
    log += head;
    for (std::size_t k = 0; k < r.classes.size(); ++k) {
      if (k) log += ' ';
      log += std::to_string(k) + ":{";
      bool first = true;
      for (ClassId c : r.classes[k]) {
        if (!first) log += ',';
        log += std::to_string(c);
        first = false;
      }
      log += '}';
    }
    log += '\n';
  }
  write_file(dir / "rounds.log", log);
}

}  // namespace ofcl
