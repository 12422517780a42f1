#include "socdbg/jsonl.hpp"

#include <fstream>
#include <sstream>

namespace socdbg::jsonl {

std::vector<Record> parse(std::string_view text) {
  std::vector<Record> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    try {
      out.push_back({line_no, Json::parse(line)});
    } catch (const Json::parse_error& e) {
      throw DataError("", std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (end == text.size()) break;
  }
  return out;
}

std::vector<Record> read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string dump(std::span<const Json> records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump(-1, ' ', false, Json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

void write(const std::filesystem::path& path, std::span<const Json> records) { write_file(path, dump(records)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

ObjectReader::ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) {
    throw DataError(path_, "expected a JSON object");
  }
}

std::string ObjectReader::field(std::string_view key) const {
  return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
}

void ObjectReader::type_error(std::string_view key, std::string_view expected) const {
  throw DataError(field(key), "expected " + std::string(expected));
}

const Json* ObjectReader::opt_any(std::string_view key) {
  seen_.emplace(key);
  auto it = j_.find(std::string(key));
  if (it == j_.end() || it->is_null()) return nullptr;
  return &*it;
}

const Json& ObjectReader::require(std::string_view key) {
  const Json* v = opt_any(key);
  if (!v) throw DataError(field(key), "required field missing");
  return *v;
}

const Json& ObjectReader::any(std::string_view key) { return require(key); }

std::string ObjectReader::str(std::string_view key) {
  const auto& v = require(key);
  if (!v.is_string()) type_error(key, "a string");
  return v.get<std::string>();
}

std::optional<std::string> ObjectReader::opt_str(std::string_view key) {
  const Json* v = opt_any(key);
  if (!v) return std::nullopt;
  if (!v->is_string()) type_error(key, "a string");
  return v->get<std::string>();
}

bool ObjectReader::boolean(std::string_view key) {
  const auto& v = require(key);
  if (!v.is_boolean()) type_error(key, "a boolean");
  return v.get<bool>();
}

std::optional<bool> ObjectReader::opt_boolean(std::string_view key) {
  const Json* v = opt_any(key);
  if (!v) return std::nullopt;
  if (!v->is_boolean()) type_error(key, "a boolean");
  return v->get<bool>();
}

long long ObjectReader::integer(std::string_view key) {
  const auto& v = require(key);
  if (!v.is_number_integer()) type_error(key, "an integer");
  return v.get<long long>();
}

std::optional<long long> ObjectReader::opt_integer(std::string_view key) {
  const Json* v = opt_any(key);
  if (!v) return std::nullopt;
  if (!v->is_number_integer()) type_error(key, "an integer");
  return v->get<long long>();
}

std::optional<double> ObjectReader::opt_number(std::string_view key) {
  const Json* v = opt_any(key);
  if (!v) return std::nullopt;
  if (!v->is_number()) type_error(key, "a number");
  return v->get<double>();
}

std::vector<std::string> ObjectReader::str_list(std::string_view key) {
  const auto& v = require(key);
  if (!v.is_array()) type_error(key, "an array of strings");
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) type_error(key, "an array of strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

void ObjectReader::finish() {
  for (const auto& [key, value] : j_.items()) {
    if (!seen_.contains(key)) throw DataError(field(key), "unknown field");
  }
}

}  // namespace socdbg::jsonl
