#pragma once

#include <stdexcept>
#include <string>

namespace ofcl {

// Thrown for shape/length disagreements between arrays, layouts or configs.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when an argument violates a documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed configuration text or an invalid configuration value.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string field = {}, int line = 0)
      : std::runtime_error(what), field_(std::move(field)), line_(line) {}

  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  std::string field_;
  int line_;
};

// Dataset files that fail to parse. `record()` is the 0-based row/record index.
class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, long record = -1)
      : std::runtime_error(what), record_(record) {}

  long record() const noexcept { return record_; }

 private:
  long record_;
};

}  // namespace ofcl
