#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace socdbg {

/// Base for every error raised by the toolkit. Command-line entry points map
/// these to exit code 1; anything else is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed persisted record: names the offending field and, when read from
/// a line-oriented file, the 1-based line number.
class DataError : public Error {
 public:
  DataError(std::string field, const std::string& message,
            std::optional<std::size_t> line = std::nullopt)
      : Error(format(field, message, line)),
        field_(std::move(field)),
        line_(line),
        detail_(message) {}

  const std::string& field() const noexcept { return field_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

  DataError at_line(std::size_t line) const { return DataError(field_, detail_, line); }

 private:
  static std::string format(const std::string& field, const std::string& message,
                            std::optional<std::size_t> line) {
    std::string out;
    if (line) out += "line " + std::to_string(*line) + ": ";
    if (!field.empty()) out += "field '" + field + "': ";
    return out + message;
  }

  std::string field_;
  std::optional<std::size_t> line_;
  std::string detail_;
};

/// Violated precondition of an operation (e.g. selecting a failure from a
/// report that has none).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace socdbg
