#pragma once

#include <filesystem>
#include <functional>
#include <initializer_list>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "socdbg/error.hpp"
#include "socdbg/model.hpp"

namespace socdbg::jsonl {

struct Record {
  std::size_t line = 0;  // 1-based physical line
  Json value;
};

/// Reads one JSON value per non-blank line. A syntax error raises DataError
/// carrying the line number.
std::vector<Record> read(const std::filesystem::path& path);
std::vector<Record> parse(std::string_view text);

void write(const std::filesystem::path& path, std::span<const Json> records);
std::string dump(std::span<const Json> records);

std::string read_file(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_file(const std::filesystem::path& path, std::string_view text);

/// Maps every record with `decode`, rethrowing DataError with the line number.
template <class T>
std::vector<T> read_as(const std::filesystem::path& path,
                       const std::function<T(const Json&)>& decode) {
  std::vector<T> out;
  for (const auto& record : read(path)) {
    try {
      out.push_back(decode(record.value));
    } catch (const DataError& e) {
      throw e.at_line(record.line);
    }
  }
  return out;
}

/// Strict accessor for decoding an object: tracks which keys were consumed so
/// that `finish()` can reject unknown ones.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path = {});

  std::string str(std::string_view key);
  std::optional<std::string> opt_str(std::string_view key);
  bool boolean(std::string_view key);
  std::optional<bool> opt_boolean(std::string_view key);
  long long integer(std::string_view key);
  std::optional<long long> opt_integer(std::string_view key);
  std::optional<double> opt_number(std::string_view key);
  const Json& any(std::string_view key);
  const Json* opt_any(std::string_view key);
  std::vector<std::string> str_list(std::string_view key);

  std::string field(std::string_view key) const;
  void finish();

 private:
  const Json& require(std::string_view key);
  [[noreturn]] void type_error(std::string_view key, std::string_view expected) const;

  const Json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

}  // namespace socdbg::jsonl
