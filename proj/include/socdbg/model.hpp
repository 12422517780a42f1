#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace socdbg {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

enum class Provenance { injected, handwritten };
enum class FailureKind { logical, runtime, syntax };

std::string_view to_string(Provenance p);
std::string_view to_string(FailureKind k);
Provenance parse_provenance(std::string_view text);
FailureKind parse_failure_kind(std::string_view text);

struct Misconception {
  std::string id;
  std::string description;
  std::set<std::string> related_constructs;
  std::optional<std::string> special_case_id;

  bool operator==(const Misconception&) const = default;
};

struct TestCase {
  std::string call_expression;
  // Python literal rendering, e.g. "2.0" or "[1, 2]".
  std::optional<std::string> expected_value;
  int ordinal = 0;

  bool operator==(const TestCase&) const = default;
};

struct SolutionRecord {
  std::string id;
  std::string problem_id;
  std::string problem_description;
  std::string source;
  std::vector<TestCase> unit_tests;

  bool operator==(const SolutionRecord&) const = default;
};

struct FailedTestDescription {
  FailureKind kind = FailureKind::logical;
  std::string call_expression;
  std::optional<std::string> actual;
  std::optional<std::string> expected;
  std::optional<std::string> error_type;
  std::optional<int> line;
  std::string sentence;

  bool operator==(const FailedTestDescription&) const = default;
};

struct DebugSample {
  std::string id;
  std::string problem_description;
  std::string buggy_source;
  // Absent until the failure-description stage has run.
  std::optional<FailedTestDescription> failed_test;
  Misconception misconception;
  Provenance provenance = Provenance::injected;
  std::vector<TestCase> unit_tests;

  bool operator==(const DebugSample&) const = default;
};

struct ArtifactRef {
  std::string kind;  // "trajectories", "conversations", "verdicts", ...
  std::string path;  // relative to the manifest's directory

  bool operator==(const ArtifactRef&) const = default;
};

struct RunManifest {
  std::string run_id;
  std::string model_config_id;
  std::string prompt_version;
  std::string started_at;
  std::string finished_at;
  std::vector<ArtifactRef> artifacts;
  Json extra = Json::object();

  bool operator==(const RunManifest&) const = default;
};

struct Violation {
  std::string field;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

std::string to_string(const Violation& v);

/// Checks every type invariant of the sample. Pure; an empty result means the
/// sample is valid.
std::vector<Violation> validate_sample(const DebugSample& sample);
std::vector<Violation> validate_failed_test(const FailedTestDescription& failure,
                                            std::string_view prefix = "failed_test");
std::vector<Violation> validate_misconception(const Misconception& m,
                                              std::string_view prefix = "misconception");
std::vector<Violation> validate_solution(const SolutionRecord& s);

/// Ids that `manifest` references but which do not exist on disk relative to
/// `base_dir`.
std::vector<std::string> missing_artifacts(const RunManifest& manifest,
                                           const std::filesystem::path& base_dir);

// JSON mapping. Readers are strict: unknown keys and wrong types raise
// DataError naming the field.
Json to_json(const Misconception& m);
Json to_json(const TestCase& t);
Json to_json(const SolutionRecord& s);
Json to_json(const FailedTestDescription& f);
Json to_json(const DebugSample& s);
Json to_json(const RunManifest& m);

Misconception misconception_from_json(const Json& j);
TestCase test_case_from_json(const Json& j);
SolutionRecord solution_from_json(const Json& j);
FailedTestDescription failed_test_from_json(const Json& j);
DebugSample sample_from_json(const Json& j);
RunManifest manifest_from_json(const Json& j);

std::vector<DebugSample> load_dataset(const std::filesystem::path& path);
void save_dataset(std::span<const DebugSample> samples, const std::filesystem::path& path);

std::vector<Misconception> load_misconceptions(const std::filesystem::path& path);
std::vector<SolutionRecord> load_solutions(const std::filesystem::path& path);

RunManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);

}  // namespace socdbg
