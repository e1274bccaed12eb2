// ofcl: command-line front end for the online federated continual learning simulator.
//
//   ofcl run <config> [--seed N] [--out DIR] [--force] [--threads N]
//   ofcl grid <config-dir> [--out DIR] [--force] [--threads N]
//   ofcl dump-memory <config> [--client K] [--seed N] [--out FILE]
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ofcl/config.hpp"
#include "ofcl/error.hpp"
#include "ofcl/experiment.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct CommonArgs {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
  bool force = false;
};

ofcl::ExperimentConfig load_config(const fs::path& path, const CommonArgs& args) {
  ofcl::ExperimentConfig config = ofcl::parse_config_file(path);
  if (args.seed) config.seed = *args.seed;
  if (args.threads) config.threads = *args.threads;
  if (!args.out.empty()) config.output_dir = args.out;
  config.validate();
  return config;
}

void print_result(const std::string& name, const ofcl::RunResult& r) {
  std::printf("%-28s A=%.4f F=%.4f rounds=%zu live=%zu replayed=%zu wall=%.2fs\n", name.c_str(),
              r.A, r.F, r.rounds.size(), r.live_examples, r.replayed_examples, r.wall_seconds);
}

int cmd_run(const fs::path& config_path, const CommonArgs& args) {
  const auto config = load_config(config_path, args);
  const auto result = ofcl::run_experiment(config);
  ofcl::emit_report(result, config.output_dir, args.force);
  print_result(config_path.stem().string(), result);
  std::printf("report written to %s\n", config.output_dir.string().c_str());
  return 0;
}

int cmd_grid(const fs::path& dir, const CommonArgs& args) {
  std::vector<fs::path> configs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".cfg" || ext == ".ini")) configs.push_back(entry.path());
  }
  std::sort(configs.begin(), configs.end());
  if (configs.empty()) {
    throw ofcl::ConfigError("no .cfg or .ini files in '" + dir.string() + "'");
  }
  const fs::path base = args.out.empty() ? fs::path("grid_out") : fs::path(args.out);
  CommonArgs per_run = args;
  per_run.out.clear();
  for (const fs::path& path : configs) {
    auto config = load_config(path, per_run);
    config.output_dir = base / path.stem();
    const auto result = ofcl::run_experiment(config);
    ofcl::emit_report(result, config.output_dir, args.force);
    print_result(path.stem().string(), result);
  }
  return 0;
}

int cmd_dump_memory(const fs::path& config_path, const CommonArgs& args, std::size_t client) {
  const auto config = load_config(config_path, args);
  if (client >= config.clients) {
    throw ofcl::ConfigError("--client " + std::to_string(client) + " out of range", "client");
  }
  ofcl::RunOptions options;
  options.keep_memory = true;
  const auto result = ofcl::run_experiment(config, options);
  if (args.out.empty()) {
    result.memories[client].write_csv(std::cout);
  } else {
    std::ofstream out(args.out);
    result.memories[client].write_csv(out);
    if (!out) throw std::runtime_error("cannot write '" + args.out + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online federated class-incremental learning simulator"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string target;
  std::size_t client = 0;

  auto add_common = [&](CLI::App* sub, bool with_out_dir) {
    sub->add_option("--seed", args.seed, "Override the master seed");
    sub->add_option("--threads", args.threads, "Client worker threads (results do not change)");
    if (with_out_dir) {
      sub->add_option("--out", args.out, "Output directory");
      sub->add_flag("--force", args.force, "Overwrite a non-empty output directory");
    }
  };

  auto* run = app.add_subcommand("run", "Run one experiment and write its report");
  run->add_option("config", target, "Experiment config file")->required();
  add_common(run, true);

  auto* grid = app.add_subcommand("grid", "Run every .cfg/.ini config in a directory");
  grid->add_option("config-dir", target, "Directory of config files")->required();
  add_common(grid, true);

  auto* dump = app.add_subcommand("dump-memory", "Run an experiment and dump a client's final memory as CSV");
  dump->add_option("config", target, "Experiment config file")->required();
  dump->add_option("--client", client, "Client index");
  add_common(dump, false);
  dump->add_option("--out", args.out, "CSV file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(target, args);
    if (grid->parsed()) return cmd_grid(target, args);
    return cmd_dump_memory(target, args, client);
  } catch (const ofcl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
