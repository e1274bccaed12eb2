#include "ofcl/stream.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>

#include "ofcl/error.hpp"

namespace ofcl {

std::string_view to_string(TaskAssignment mode) noexcept {
  return mode == TaskAssignment::RandomShuffle ? "shuffle" : "size_desc";
}

TaskAssignment parse_task_assignment(std::string_view text) {
  if (text == "shuffle") return TaskAssignment::RandomShuffle;
  if (text == "size_desc") return TaskAssignment::SizeDescending;
  throw PreconditionError("unknown task assignment '" + std::string(text) + "'");
}

std::vector<TaskSpec> assign_classes_to_tasks(std::vector<ClassSize> classes,
                                              std::size_t num_tasks, TaskAssignment mode,
                                              Rng& rng) {
  if (num_tasks < 1) throw PreconditionError("assign_classes_to_tasks: need at least one task");
  if (num_tasks > classes.size()) {
    throw PreconditionError("assign_classes_to_tasks: " + std::to_string(num_tasks) +
                            " tasks for " + std::to_string(classes.size()) + " classes");
  }
  std::sort(classes.begin(), classes.end(),
            [](const ClassSize& a, const ClassSize& b) { return a.id < b.id; });
  if (std::adjacent_find(classes.begin(), classes.end(), [](const auto& a, const auto& b) {
        return a.id == b.id;
      }) != classes.end()) {
    throw PreconditionError("assign_classes_to_tasks: duplicate class id");
  }
  if (mode == TaskAssignment::RandomShuffle) {
    std::shuffle(classes.begin(), classes.end(), rng);
  } else {
    std::stable_sort(classes.begin(), classes.end(),
                     [](const ClassSize& a, const ClassSize& b) { return a.size > b.size; });
  }
  const std::size_t base = classes.size() / num_tasks;
  const std::size_t extra = classes.size() % num_tasks;
  std::vector<TaskSpec> tasks(num_tasks);
  std::size_t next = 0;
  for (std::size_t t = 0; t < num_tasks; ++t) {
    tasks[t].task_id = static_cast<TaskId>(t);
    const std::size_t n = base + (t < extra ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i) tasks[t].classes.insert(classes[next++].id);
  }
  return tasks;
}

std::vector<std::vector<LabeledExample>> partition_to_clients(std::vector<LabeledExample> data,
                                                              std::size_t num_clients, Rng& rng) {
  if (num_clients < 1) throw PreconditionError("partition_to_clients: need at least one client");
  std::shuffle(data.begin(), data.end(), rng);
  std::vector<std::vector<LabeledExample>> parts(num_clients);
  for (std::size_t i = 0; i < data.size(); ++i) {
    parts[i % num_clients].push_back(std::move(data[i]));
  }
  return parts;
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_train_test(
    const std::vector<LabeledExample>& data, double test_fraction, Rng& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw PreconditionError("split_train_test: fraction must be in (0, 1)");
  }
  std::map<ClassId, std::vector<const LabeledExample*>> by_class;
  for (const LabeledExample& ex : data) by_class[ex.label].push_back(&ex);
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < members.size(); ++i) {
      (i < n_test ? test : train).push_back(*members[i]);
    }
  }
  return {std::move(train), std::move(test)};
}

ClientStream::ClientStream(int client_id, std::vector<std::vector<LabeledExample>> per_task,
                           std::size_t batch_size, Rng order_rng)
    : client_id_(client_id) {
  if (batch_size < 1) throw PreconditionError("ClientStream: batch_size must be >= 1");
  batches_.resize(per_task.size());
  for (std::size_t t = 0; t < per_task.size(); ++t) {
    auto& examples = per_task[t];
    std::shuffle(examples.begin(), examples.end(), order_rng);
    for (std::size_t start = 0; start < examples.size(); start += batch_size) {
      const std::size_t stop = std::min(start + batch_size, examples.size());
      MiniBatch batch;
      batch.task_id = static_cast<TaskId>(t);
      batch.examples.assign(std::make_move_iterator(examples.begin() + start),
                            std::make_move_iterator(examples.begin() + stop));
      batches_[t].push_back(std::move(batch));
    }
  }
}

StreamEvent ClientStream::next_batch() {
  if (task_ >= batches_.size()) return EndOfStream{};
  auto& task_batches = batches_[task_];
  if (bn_ < task_batches.size()) {
    MiniBatch out = std::move(task_batches[bn_]);
    task_batches[bn_] = MiniBatch{};
    ++bn_;
    return out;
  }
  task_batches.clear();
  ++task_;
  bn_ = 0;
  return EndOfTask{};
}

std::vector<std::vector<double>> blob_centers(std::size_t num_classes, std::size_t dim,
                                              double center_spread, Rng& rng) {
  std::normal_distribution<double> center(0.0, center_spread);
  std::vector<std::vector<double>> centers(num_classes, std::vector<double>(dim));
  for (auto& mu : centers) {
    for (double& v : mu) v = center(rng);
  }
  return centers;
}

std::vector<LabeledExample> synth_gaussian_blobs(std::span<const std::size_t> class_sizes,
                                                 std::size_t dim, double center_spread,
                                                 double cluster_sigma, Rng& rng) {
  if (dim < 2) throw PreconditionError("synth_gaussian_blobs: dim must be >= 2");
  if (!(center_spread >= 0.0) || !(cluster_sigma >= 0.0)) {
    throw PreconditionError("synth_gaussian_blobs: spreads must be >= 0");
  }
  for (std::size_t n : class_sizes) {
    if (n < 1) throw PreconditionError("synth_gaussian_blobs: class sizes must be >= 1");
  }
  const auto centers = blob_centers(class_sizes.size(), dim, center_spread, rng);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<LabeledExample> out;
  std::uint64_t id = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    for (std::size_t i = 0; i < class_sizes[c]; ++i) {
      LabeledExample ex;
      ex.label = static_cast<ClassId>(c);
      ex.id = id++;
      ex.features.resize(dim);
      for (std::size_t j = 0; j < dim; ++j) ex.features[j] = centers[c][j] + cluster_sigma * unit(rng);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

std::string_view to_string(DatasetFormat format) noexcept {
  return format == DatasetFormat::Csv ? "csv" : "binary";
}

DatasetFormat parse_dataset_format(std::string_view text) {
  if (text == "csv") return DatasetFormat::Csv;
  if (text == "binary") return DatasetFormat::Binary;
  throw PreconditionError("unknown dataset format '" + std::string(text) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size() && !text.empty();
}

std::vector<LabeledExample> load_csv(std::istream& in) {
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t dim = 0;
  long row = -1;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    LabeledExample ex;
    ex.id = static_cast<std::uint64_t>(row);
    std::string_view rest = line;
    std::size_t field = 0;
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view cell = rest.substr(0, comma);
      if (field == 0) {
        if (!parse_number(cell, ex.label) || ex.label < 0) {
          throw DatasetError("row " + std::to_string(row) + ": bad label '" + std::string(cell) + "'",
                             row);
        }
      } else {
        double v = 0.0;
        if (!parse_number(cell, v)) {
          throw DatasetError("row " + std::to_string(row) + ": bad feature '" +
                                 std::string(cell) + "'",
                             row);
        }
        ex.features.push_back(v);
      }
      ++field;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (ex.features.empty()) throw DatasetError("row " + std::to_string(row) + ": no features", row);
    if (row == 0) dim = ex.features.size();
    if (ex.features.size() != dim) {
      throw DatasetError("row " + std::to_string(row) + ": expected " + std::to_string(dim) +
                             " features, got " + std::to_string(ex.features.size()),
                         row);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> bytes{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                  static_cast<char>((v >> 16) & 0xff),
                                  static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes.data(), bytes.size());
}

std::vector<LabeledExample> load_binary(std::istream& in) {
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty()) return {};
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 8) throw DatasetError("truncated header", -1);
  const std::uint32_t count = read_u32(data);
  const std::uint32_t dim = read_u32(data + 4);
  const std::size_t record_size = 4 * (static_cast<std::size_t>(dim) + 1);
  std::vector<LabeledExample> out;
  out.reserve(count);
  std::size_t pos = 8;
  for (std::uint32_t r = 0; r < count; ++r) {
    if (pos + record_size > bytes.size()) {
      throw DatasetError("record " + std::to_string(r) + ": truncated file", r);
    }
    LabeledExample ex;
    ex.id = r;
    ex.label = static_cast<ClassId>(read_u32(data + pos));
    if (ex.label < 0) throw DatasetError("record " + std::to_string(r) + ": label overflow", r);
    ex.features.resize(dim);
    for (std::uint32_t j = 0; j < dim; ++j) {
      ex.features[j] = std::bit_cast<float>(read_u32(data + pos + 4 * (j + 1)));
    }
    pos += record_size;
    out.push_back(std::move(ex));
  }
  if (pos != bytes.size()) {
    throw DatasetError("trailing bytes after record " + std::to_string(count), count);
  }
  return out;
}

}  // namespace

std::vector<LabeledExample> load_vector_dataset(const std::filesystem::path& path,
                                                DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset '" + path.string() + "'");
  try {
    return format == DatasetFormat::Csv ? load_csv(in) : load_binary(in);
  } catch (const DatasetError& e) {
    throw DatasetError(path.string() + ": " + e.what(), e.record());
  }
}

void save_vector_dataset(const std::filesystem::path& path, DatasetFormat format,
                         std::span<const LabeledExample> examples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write dataset '" + path.string() + "'");
  const std::size_t dim = examples.empty() ? 0 : examples.front().features.size();
  for (const LabeledExample& ex : examples) {
    if (ex.features.size() != dim) throw DimensionError("save_vector_dataset: ragged features");
  }
  if (format == DatasetFormat::Csv) {
    char buf[32];
    for (const LabeledExample& ex : examples) {
      out << ex.label;
      for (double v : ex.features) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << ',' << buf;
      }
      out << '\n';
    }
  } else {
    write_u32(out, static_cast<std::uint32_t>(examples.size()));
    write_u32(out, static_cast<std::uint32_t>(dim));
    for (const LabeledExample& ex : examples) {
      write_u32(out, static_cast<std::uint32_t>(ex.label));
      for (double v : ex.features) write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  if (!out) throw DatasetError("write failed for '" + path.string() + "'");
}

}  // namespace ofcl
