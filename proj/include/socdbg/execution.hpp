#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "socdbg/model.hpp"
#include "socdbg/process.hpp"

namespace socdbg {

enum class TestStatus { passed, logical, runtime, syntax, timeout };

std::string_view to_string(TestStatus s);
TestStatus parse_test_status(std::string_view text);

struct TestOutcome {
  int ordinal = 0;
  TestStatus status = TestStatus::passed;
  std::optional<std::string> actual;
  std::optional<std::string> error_type;
  std::optional<int> line;
  std::optional<std::string> message;
  long duration_ms = 0;

  bool operator==(const TestOutcome&) const = default;
};

struct ExecutionReport {
  std::vector<TestOutcome> outcomes;
  std::vector<std::string> warnings;

  bool operator==(const ExecutionReport&) const = default;
};

struct SandboxOptions {
  // Script speaking the job/report protocol on stdin/stdout.
  std::filesystem::path runner;
  std::string python = "python3";
  int timeout_ms = 5000;
  // Startup allowance on top of timeout_ms before the process group is killed.
  int grace_ms = 2000;
  ProcessLimits limits;
};

/// SOCDBG_SANDBOX_RUNNER and SOCDBG_PYTHON override the defaults.
SandboxOptions sandbox_options_from_env();

/// Wire format sent to the runner.
Json make_job(std::string_view source, std::span<const TestCase> tests, int timeout_ms);
/// Parses the runner's reply, checking it covers exactly `tests`.
ExecutionReport parse_report(const Json& reply, std::span<const TestCase> tests);

/// Runs every test in a fresh interpreter. Throws InfrastructureError when the
/// runner cannot be started or answers with something other than a report.
ExecutionReport run_tests(std::string_view source, std::span<const TestCase> tests, const SandboxOptions& options);

struct ExecutionJob {
  std::string source;
  std::vector<TestCase> tests;
};

/// Runs up to `jobs` sandboxes at once; results are in input order. A job whose
/// sandbox fails to start yields its error message instead of a report.
struct ExecutionResult {
  std::optional<ExecutionReport> report;
  std::optional<std::string> error;
};
std::vector<ExecutionResult> run_tests_batch(std::span<const ExecutionJob> jobs, const SandboxOptions& options,
                                             int concurrency);

/// False iff every test passed. An empty report is not buggy.
bool is_buggy(const ExecutionReport& report);

struct SelectedFailure {
  TestCase test;
  TestOutcome outcome;
};

/// Syntax first (first test, since all fail alike), then runtime, then logical,
/// then timeouts; within a class the simplest arguments, then the ordinal.
/// Throws PreconditionError when nothing failed.
SelectedFailure select_simplest_failure(const ExecutionReport& report, std::span<const TestCase> tests);

/// Ranking key for "simplest inputs": argument text length, then the magnitude
/// of the first numeric literal among the arguments.
std::pair<std::size_t, double> argument_simplicity(std::string_view call_expression);

/// Structured description of a selected failure, sentence included.
FailedTestDescription describe_selected(const SelectedFailure& failure);

/// Instantiates the sentence template for the failure kind. Throws DataError
/// when a field the template needs is missing.
std::string render_convention(const FailedTestDescription& failure);

/// Inverse of render_convention; nullopt when the sentence follows none of the
/// templates.
std::optional<FailedTestDescription> parse_convention(std::string_view sentence);

Json to_json(const TestOutcome& o);
Json to_json(const ExecutionReport& r);
ExecutionReport execution_report_from_json(const Json& j);

}  // namespace socdbg
