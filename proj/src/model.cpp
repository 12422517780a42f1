#include "socdbg/model.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "socdbg/error.hpp"
#include "socdbg/jsonl.hpp"

namespace socdbg {

std::string_view to_string(Provenance p) {
  return p == Provenance::injected ? "injected" : "handwritten";
}

std::string_view to_string(FailureKind k) {
  switch (k) {
    case FailureKind::logical: return "logical";
    case FailureKind::runtime: return "runtime";
    case FailureKind::syntax: return "syntax";
  }
  return "logical";
}

Provenance parse_provenance(std::string_view text) {
  if (text == "injected") return Provenance::injected;
  if (text == "handwritten") return Provenance::handwritten;
  throw DataError("provenance", "expected 'injected' or 'handwritten', got '" + std::string(text) + "'");
}

FailureKind parse_failure_kind(std::string_view text) {
  if (text == "logical") return FailureKind::logical;
  if (text == "runtime") return FailureKind::runtime;
  if (text == "syntax") return FailureKind::syntax;
  throw DataError("kind", "expected logical, runtime or syntax, got '" + std::string(text) + "'");
}

std::string to_string(const Violation& v) { return v.field + ": " + v.rule; }

namespace {

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

std::string join_path(std::string_view prefix, std::string_view field) {
  return prefix.empty() ? std::string(field) : std::string(prefix) + "." + std::string(field);
}

void check_tests(const std::vector<TestCase>& tests, std::string_view prefix,
                 std::vector<Violation>& out) {
  std::set<int> ordinals;
  for (const auto& t : tests) {
    const auto where = join_path(prefix, "tests[" + std::to_string(t.ordinal) + "]");
    if (t.ordinal < 1) out.push_back({where + ".ordinal", "must be >= 1"});
    if (!ordinals.insert(t.ordinal).second) out.push_back({where + ".ordinal", "must be unique"});
    if (blank(t.call_expression)) out.push_back({where + ".call", "must not be empty"});
  }
}

}  // namespace

std::vector<Violation> validate_misconception(const Misconception& m, std::string_view prefix) {
  std::vector<Violation> out;
  if (blank(m.description)) out.push_back({join_path(prefix, "description"), "must not be empty"});
  if (m.related_constructs.empty() && !m.special_case_id) {
    out.push_back({join_path(prefix, "related_constructs"),
                   "must not be empty unless special_case_id is set"});
  }
  return out;
}

std::vector<Violation> validate_failed_test(const FailedTestDescription& f, std::string_view prefix) {
  std::vector<Violation> out;
  auto at = [&](std::string_view field) { return join_path(prefix, field); };
  if (blank(f.call_expression)) out.push_back({at("call"), "must not be empty"});
  if (blank(f.sentence)) out.push_back({at("sentence"), "must not be empty"});
  if (f.kind == FailureKind::logical) {
    if (!f.actual) out.push_back({at("actual"), "required when kind is logical"});
    if (!f.expected) out.push_back({at("expected"), "required when kind is logical"});
  } else {
    if (!f.line) out.push_back({at("line"), std::string("required when kind is ") + std::string(to_string(f.kind))});
  }
  if (f.kind == FailureKind::runtime && (!f.error_type || blank(*f.error_type))) {
    out.push_back({at("error_type"), "required when kind is runtime"});
  }
  if (f.line && *f.line < 1) out.push_back({at("line"), "must be a positive integer"});
  return out;
}

std::vector<Violation> validate_sample(const DebugSample& s) {
  std::vector<Violation> out;
  if (blank(s.problem_description)) out.push_back({"problem", "must not be empty"});
  if (blank(s.buggy_source)) out.push_back({"bug_code", "must not be empty"});
  if (!s.failed_test) {
    out.push_back({"failed_test", "required"});
  } else {
    auto more = validate_failed_test(*s.failed_test);
    out.insert(out.end(), more.begin(), more.end());
  }
  auto more = validate_misconception(s.misconception);
  out.insert(out.end(), more.begin(), more.end());
  check_tests(s.unit_tests, "", out);
  return out;
}

std::vector<Violation> validate_solution(const SolutionRecord& s) {
  std::vector<Violation> out;
  if (blank(s.source)) out.push_back({"source", "must not be empty"});
  if (s.unit_tests.empty()) out.push_back({"tests", "at least one unit test is required"});
  check_tests(s.unit_tests, "", out);
  return out;
}

std::vector<std::string> missing_artifacts(const RunManifest& manifest,
                                           const std::filesystem::path& base_dir) {
  std::vector<std::string> out;
  for (const auto& a : manifest.artifacts) {
    if (!std::filesystem::exists(base_dir / a.path)) out.push_back(a.path);
  }
  return out;
}

// --- JSON -------------------------------------------------------------------

namespace {

void put_opt(Json& j, const char* key, const std::optional<std::string>& v) {
  if (v) j[key] = *v;
}

void check_schema(jsonl::ObjectReader& r) {
  if (auto v = r.opt_integer("schema_version"); v && *v != kSchemaVersion) {
    throw DataError(r.field("schema_version"),
                    "unsupported schema version " + std::to_string(*v));
  }
}

std::vector<TestCase> tests_from_json(const Json& j, const std::string& field) {
  if (!j.is_array()) throw DataError(field, "expected an array");
  std::vector<TestCase> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      out.push_back(test_case_from_json(j[i]));
    } catch (const DataError& e) {
      throw DataError(field + "[" + std::to_string(i) + "]." + e.field(), e.detail());
    }
  }
  return out;
}

Json tests_to_json(const std::vector<TestCase>& tests) {
  Json arr = Json::array();
  for (const auto& t : tests) arr.push_back(to_json(t));
  return arr;
}

template <class F>
auto nested(const std::string& prefix, F&& f) {
  try {
    return f();
  } catch (const DataError& e) {
    if (prefix.empty()) throw;
    throw DataError(e.field().empty() ? prefix : prefix + "." + e.field(), e.detail());
  }
}

}  // namespace

Json to_json(const Misconception& m) {
  Json j;
  j["id"] = m.id;
  j["description"] = m.description;
  j["related_constructs"] = Json::array();
  for (const auto& c : m.related_constructs) j["related_constructs"].push_back(c);
  put_opt(j, "special_case_id", m.special_case_id);
  return j;
}

Json to_json(const TestCase& t) {
  Json j;
  j["ordinal"] = t.ordinal;
  j["call"] = t.call_expression;
  put_opt(j, "expected", t.expected_value);
  return j;
}

Json to_json(const SolutionRecord& s) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["id"] = s.id;
  j["problem_id"] = s.problem_id;
  j["problem"] = s.problem_description;
  j["source"] = s.source;
  j["tests"] = tests_to_json(s.unit_tests);
  return j;
}

Json to_json(const FailedTestDescription& f) {
  Json j;
  j["kind"] = std::string(to_string(f.kind));
  j["call"] = f.call_expression;
  put_opt(j, "actual", f.actual);
  put_opt(j, "expected", f.expected);
  put_opt(j, "error_type", f.error_type);
  if (f.line) j["line"] = *f.line;
  j["sentence"] = f.sentence;
  return j;
}

Json to_json(const DebugSample& s) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["id"] = s.id;
  j["problem"] = s.problem_description;
  j["bug_code"] = s.buggy_source;
  if (s.failed_test) j["failed_test"] = to_json(*s.failed_test);
  j["misconception"] = to_json(s.misconception);
  j["provenance"] = std::string(to_string(s.provenance));
  if (!s.unit_tests.empty()) j["tests"] = tests_to_json(s.unit_tests);
  return j;
}

Json to_json(const RunManifest& m) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["run_id"] = m.run_id;
  j["model_config_id"] = m.model_config_id;
  j["prompt_version"] = m.prompt_version;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["artifacts"] = Json::array();
  for (const auto& a : m.artifacts) j["artifacts"].push_back(Json{{"kind", a.kind}, {"path", a.path}});
  j["extra"] = m.extra;
  return j;
}

Misconception misconception_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  Misconception m;
  m.id = r.str("id");
  m.description = r.str("description");
  for (auto& c : r.str_list("related_constructs")) m.related_constructs.insert(std::move(c));
  m.special_case_id = r.opt_str("special_case_id");
  r.finish();
  return m;
}

TestCase test_case_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  TestCase t;
  t.ordinal = static_cast<int>(r.integer("ordinal"));
  t.call_expression = r.str("call");
  t.expected_value = r.opt_str("expected");
  r.finish();
  return t;
}

SolutionRecord solution_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  check_schema(r);
  SolutionRecord s;
  s.id = r.str("id");
  s.problem_id = r.str("problem_id");
  s.problem_description = r.opt_str("problem").value_or("");
  s.source = r.str("source");
  if (const Json* tests = r.opt_any("tests")) s.unit_tests = tests_from_json(*tests, "tests");
  r.finish();
  return s;
}

FailedTestDescription failed_test_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  FailedTestDescription f;
  f.kind = parse_failure_kind(r.str("kind"));
  f.call_expression = r.str("call");
  f.actual = r.opt_str("actual");
  f.expected = r.opt_str("expected");
  f.error_type = r.opt_str("error_type");
  if (auto line = r.opt_integer("line")) f.line = static_cast<int>(*line);
  f.sentence = r.str("sentence");
  r.finish();
  return f;
}

DebugSample sample_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  check_schema(r);
  DebugSample s;
  s.id = r.str("id");
  s.problem_description = r.str("problem");
  s.buggy_source = r.str("bug_code");
  if (const Json* f = r.opt_any("failed_test")) {
    s.failed_test = nested("failed_test", [&] { return failed_test_from_json(*f); });
  }
  s.misconception = nested("misconception", [&] { return misconception_from_json(r.any("misconception")); });
  s.provenance = parse_provenance(r.str("provenance"));
  if (const Json* tests = r.opt_any("tests")) s.unit_tests = tests_from_json(*tests, "tests");
  r.finish();
  return s;
}

RunManifest manifest_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  check_schema(r);
  RunManifest m;
  m.run_id = r.str("run_id");
  m.model_config_id = r.opt_str("model_config_id").value_or("");
  m.prompt_version = r.opt_str("prompt_version").value_or("");
  m.started_at = r.opt_str("started_at").value_or("");
  m.finished_at = r.opt_str("finished_at").value_or("");
  if (const Json* arts = r.opt_any("artifacts")) {
    for (const auto& a : *arts) {
      jsonl::ObjectReader ar(a, "artifacts");
      m.artifacts.push_back({ar.str("kind"), ar.str("path")});
      ar.finish();
    }
  }
  if (const Json* extra = r.opt_any("extra")) m.extra = *extra;
  r.finish();
  return m;
}

std::vector<DebugSample> load_dataset(const std::filesystem::path& path) {
  return jsonl::read_as<DebugSample>(path, sample_from_json);
}

void save_dataset(std::span<const DebugSample> samples, const std::filesystem::path& path) {
  std::vector<Json> records;
  records.reserve(samples.size());
  for (const auto& s : samples) records.push_back(to_json(s));
  jsonl::write(path, records);
}

std::vector<Misconception> load_misconceptions(const std::filesystem::path& path) {
  return jsonl::read_as<Misconception>(path, misconception_from_json);
}

std::vector<SolutionRecord> load_solutions(const std::filesystem::path& path) {
  return jsonl::read_as<SolutionRecord>(path, solution_from_json);
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return manifest_from_json(Json::parse(buffer.str()));
  } catch (const Json::parse_error& e) {
    throw DataError("", std::string("invalid JSON: ") + e.what());
  }
}

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << to_json(manifest).dump(2) << '\n';
}

}  // namespace socdbg
