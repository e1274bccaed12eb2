#include "ofcl/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "ofcl/error.hpp"

namespace ofcl {

std::string_view to_string(OptimizerKind kind) noexcept {
  return kind == OptimizerKind::SGD ? "sgd" : "adam";
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct BadValue {
  std::string reason;
};

std::size_t to_size(std::string_view v) {
  v = trim(v);
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    throw BadValue{"expected a non-negative integer, got '" + std::string(v) + "'"};
  }
  return out;
}

std::uint64_t to_u64(std::string_view v) { return static_cast<std::uint64_t>(to_size(v)); }

double to_real(std::string_view v) {
  v = trim(v);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    throw BadValue{"expected a number, got '" + std::string(v) + "'"};
  }
  return out;
}

bool to_bool(std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw BadValue{"expected true/false, got '" + std::string(v) + "'"};
}

std::vector<std::size_t> to_size_list(std::string_view v) {
  std::vector<std::size_t> out;
  v = trim(v);
  if (v.empty()) return out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(to_size(v.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

template <typename F>
auto enum_value(F&& parse, std::string_view v) {
  try {
    return parse(trim(v));
  } catch (const PreconditionError& e) {
    throw BadValue{e.what()};
  }
}

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

// Perturbation fields are staged separately because PerturbationSpec stores only
// the parameter of the selected kind.
struct Staging {
  std::string kind = "gaussian";
  double sigma = 0.1;
  double mask_fraction = 0.2;
};

struct Key {
  std::string_view section;
  std::string_view name;
  std::function<void(ExperimentConfig&, Staging&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;  // empty: emitted specially
};

const std::vector<Key>& keys() {
  using C = ExperimentConfig;
  using S = Staging;
  using V = std::string_view;
  static const std::vector<Key> table = {
      {"data", "source",
       [](C& c, S&, V v) {
         v = trim(v);
         if (v == "synthetic") c.data.source = DataSource::Synthetic;
         else if (v == "file") c.data.source = DataSource::File;
         else throw BadValue{"expected synthetic or file"};
       },
       [](const C& c) { return std::string(c.data.source == DataSource::File ? "file" : "synthetic"); }},
      {"data", "path", [](C& c, S&, V v) { c.data.path = std::string(trim(v)); },
       [](const C& c) { return c.data.path.string(); }},
      {"data", "format",
       [](C& c, S&, V v) { c.data.format = enum_value(parse_dataset_format, v); },
       [](const C& c) { return std::string(to_string(c.data.format)); }},
      {"data", "num_classes", [](C& c, S&, V v) { c.data.num_classes = to_size(v); },
       [](const C& c) { return std::to_string(c.data.num_classes); }},
      {"data", "samples_per_class", [](C& c, S&, V v) { c.data.samples_per_class = to_size(v); },
       [](const C& c) { return std::to_string(c.data.samples_per_class); }},
      {"data", "class_sizes", [](C& c, S&, V v) { c.data.class_sizes = to_size_list(v); },
       [](const C& c) { return fmt_list(c.data.class_sizes); }},
      {"data", "dim", [](C& c, S&, V v) { c.data.dim = to_size(v); },
       [](const C& c) { return std::to_string(c.data.dim); }},
      {"data", "center_spread", [](C& c, S&, V v) { c.data.center_spread = to_real(v); },
       [](const C& c) { return fmt_real(c.data.center_spread); }},
      {"data", "cluster_sigma", [](C& c, S&, V v) { c.data.cluster_sigma = to_real(v); },
       [](const C& c) { return fmt_real(c.data.cluster_sigma); }},
      {"data", "tasks", [](C& c, S&, V v) { c.data.num_tasks = to_size(v); },
       [](const C& c) { return std::to_string(c.data.num_tasks); }},
      {"data", "task_assignment",
       [](C& c, S&, V v) { c.data.assignment = enum_value(parse_task_assignment, v); },
       [](const C& c) { return std::string(to_string(c.data.assignment)); }},
      {"data", "test_fraction", [](C& c, S&, V v) { c.data.test_fraction = to_real(v); },
       [](const C& c) { return fmt_real(c.data.test_fraction); }},

      {"federation", "clients", [](C& c, S&, V v) { c.clients = to_size(v); },
       [](const C& c) { return std::to_string(c.clients); }},
      {"federation", "batch_size", [](C& c, S&, V v) { c.batch_size = to_size(v); },
       [](const C& c) { return std::to_string(c.batch_size); }},
      {"federation", "burn_in", [](C& c, S&, V v) { c.schedule.burn_in = to_size(v); },
       [](const C& c) { return std::to_string(c.schedule.burn_in); }},
      {"federation", "q", [](C& c, S&, V v) { c.schedule.q = to_size(v); },
       [](const C& c) { return std::to_string(c.schedule.q); }},
      {"federation", "aggregation",
       [](C& c, S&, V v) { c.aggregation = enum_value(parse_aggregation, v); },
       [](const C& c) { return std::string(to_string(c.aggregation)); }},
      {"federation", "fedprox_mu", [](C& c, S&, V v) { c.fedprox_mu = to_real(v); },
       [](const C& c) { return fmt_real(c.fedprox_mu); }},
      {"federation", "reset_optimizer_on_sync",
       [](C& c, S&, V v) { c.reset_optimizer_on_sync = to_bool(v); },
       [](const C& c) { return std::string(c.reset_optimizer_on_sync ? "true" : "false"); }},

      {"memory", "capacity", [](C& c, S&, V v) { c.memory_capacity = to_size(v); },
       [](const C& c) { return std::to_string(c.memory_capacity); }},
      {"memory", "policy",
       [](C& c, S&, V v) { c.memory_policy = enum_value(parse_memory_policy, v); },
       [](const C& c) { return std::string(to_string(c.memory_policy)); }},
      {"memory", "metric", [](C& c, S&, V v) { c.metric = enum_value(parse_score_metric, v); },
       [](const C& c) { return std::string(to_string(c.metric)); }},
      {"memory", "rescore_stored", [](C& c, S&, V v) { c.rescore_stored = to_bool(v); },
       [](const C& c) { return std::string(c.rescore_stored ? "true" : "false"); }},

      {"perturbation", "count", [](C& c, S&, V v) { c.perturbation.count = to_size(v); },
       [](const C& c) { return std::to_string(c.perturbation.count); }},
      {"perturbation", "kind",
       [](C&, S& s, V v) {
         v = trim(v);
         if (v != "gaussian" && v != "mask") throw BadValue{"expected gaussian or mask"};
         s.kind = std::string(v);
       },
       {}},
      {"perturbation", "sigma", [](C&, S& s, V v) { s.sigma = to_real(v); }, {}},
      {"perturbation", "mask_fraction", [](C&, S& s, V v) { s.mask_fraction = to_real(v); }, {}},

      {"model", "hidden", [](C& c, S&, V v) { c.hidden = to_size_list(v); },
       [](const C& c) { return fmt_list(c.hidden); }},
      {"model", "optimizer",
       [](C& c, S&, V v) {
         v = trim(v);
         if (v == "sgd") c.optimizer = OptimizerKind::SGD;
         else if (v == "adam") c.optimizer = OptimizerKind::Adam;
         else throw BadValue{"expected sgd or adam"};
       },
       [](const C& c) { return std::string(to_string(c.optimizer)); }},
      {"model", "learning_rate", [](C& c, S&, V v) { c.learning_rate = to_real(v); },
       [](const C& c) { return fmt_real(c.learning_rate); }},

      {"experiment", "seed", [](C& c, S&, V v) { c.seed = to_u64(v); },
       [](const C& c) { return std::to_string(c.seed); }},
      {"experiment", "threads", [](C& c, S&, V v) { c.threads = to_size(v); },
       [](const C& c) { return std::to_string(c.threads); }},
      {"experiment", "output", [](C& c, S&, V v) { c.output_dir = std::string(trim(v)); },
       [](const C& c) { return c.output_dir.string(); }},
  };
  return table;
}

const Key* find_key(std::string_view name) {
  for (const Key& k : keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

void require(bool ok, const char* field, const std::string& message) {
  if (!ok) throw ConfigError(std::string(field) + ": " + message, field);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (data.source == DataSource::File) {
    require(!data.path.empty(), "path", "required when source = file");
  } else {
    require(data.num_classes >= 2, "num_classes", "must be >= 2");
    require(data.class_sizes.empty() || data.class_sizes.size() == data.num_classes,
            "class_sizes", "needs one entry per class");
    require(data.samples_per_class >= 1, "samples_per_class", "must be >= 1");
    for (std::size_t n : data.class_sizes) require(n >= 1, "class_sizes", "entries must be >= 1");
    require(data.dim >= 2, "dim", "must be >= 2");
    require(data.center_spread >= 0.0, "center_spread", "must be >= 0");
    require(data.cluster_sigma >= 0.0, "cluster_sigma", "must be >= 0");
  }
  require(data.num_tasks >= 2, "tasks", "must be >= 2 (forgetting needs a past task)");
  require(data.test_fraction > 0.0 && data.test_fraction < 1.0, "test_fraction",
          "must be in (0, 1)");
  require(clients >= 1, "clients", "must be >= 1");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(schedule.q >= 1, "q", "must be >= 1");
  require(fedprox_mu >= 0.0, "fedprox_mu", "must be >= 0");
  require(perturbation.count >= 1, "count", "must be >= 1");
  if (const auto* g = std::get_if<GaussianNoise>(&perturbation.kind)) {
    require(g->sigma > 0.0, "sigma", "must be > 0");
  } else {
    const double f = std::get<ElementMask>(perturbation.kind).fraction;
    require(f >= 0.0 && f < 1.0, "mask_fraction", "must be in [0, 1)");
  }
  for (std::size_t h : hidden) require(h >= 1, "hidden", "layer widths must be >= 1");
  require(learning_rate > 0.0, "learning_rate", "must be > 0");
  require(threads >= 1, "threads", "must be >= 1");
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  Staging staging;
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty() || text.front() == '#' || text.front() == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header", {}, line_no);
      section = std::string(trim(text.substr(1, text.size() - 2)));
      bool known = false;
      for (const Key& k : keys()) known = known || k.section == section;
      if (!known) throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + section + "]", section, line_no);
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'", {}, line_no);
    }
    const std::string name(trim(text.substr(0, eq)));
    const Key* key = find_key(name);
    if (!key) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + name + "'", name, line_no);
    if (!section.empty() && key->section != section) {
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + name + "' belongs to [" +
                            std::string(key->section) + "], not [" + section + "]",
                        name, line_no);
    }
    try {
      key->set(config, staging, text.substr(eq + 1));
    } catch (const BadValue& bad) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + name + ": " + bad.reason, name, line_no);
    }
  }
  if (staging.kind == "gaussian") {
    config.perturbation.kind = GaussianNoise{staging.sigma};
  } else {
    config.perturbation.kind = ElementMask{staging.mask_fraction};
  }
  config.validate();
  return config;
}

ExperimentConfig parse_config_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_config(in);
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  return parse_config(in);
}

std::string format_config(const ExperimentConfig& config) {
  std::ostringstream out;
  std::string_view section;
  for (const Key& k : keys()) {
    if (k.section != section) {
      if (!section.empty()) out << '\n';
      section = k.section;
      out << '[' << section << "]\n";
    }
    if (k.get) {
      out << k.name << " = " << k.get(config) << '\n';
    } else if (k.name == "kind") {
      out << "kind = "
          << (std::holds_alternative<GaussianNoise>(config.perturbation.kind) ? "gaussian" : "mask")
          << '\n';
    } else if (k.name == "sigma") {
      if (const auto* g = std::get_if<GaussianNoise>(&config.perturbation.kind)) {
        out << "sigma = " << fmt_real(g->sigma) << '\n';
      }
    } else if (k.name == "mask_fraction") {
      if (const auto* m = std::get_if<ElementMask>(&config.perturbation.kind)) {
        out << "mask_fraction = " << fmt_real(m->fraction) << '\n';
      }
    }
  }
  return out.str();
}

}  // namespace ofcl
