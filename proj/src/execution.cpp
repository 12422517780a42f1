#include "socdbg/execution.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <regex>
#include <thread>

#include "socdbg/jsonl.hpp"

namespace socdbg {

std::string_view to_string(TestStatus s) {
  switch (s) {
    case TestStatus::passed: return "passed";
    case TestStatus::logical: return "logical";
    case TestStatus::runtime: return "runtime";
    case TestStatus::syntax: return "syntax";
    case TestStatus::timeout: return "timeout";
  }
  return "passed";
}

TestStatus parse_test_status(std::string_view text) {
  for (auto s : {TestStatus::passed, TestStatus::logical, TestStatus::runtime, TestStatus::syntax,
                 TestStatus::timeout}) {
    if (to_string(s) == text) return s;
  }
  throw DataError("status", "unknown test status '" + std::string(text) + "'");
}

SandboxOptions sandbox_options_from_env() {
  SandboxOptions o;
  if (const char* r = std::getenv("SOCDBG_SANDBOX_RUNNER")) o.runner = r;
  if (const char* p = std::getenv("SOCDBG_PYTHON")) o.python = p;
  return o;
}

Json make_job(std::string_view source, std::span<const TestCase> tests, int timeout_ms) {
  Json list = Json::array();
  for (const auto& t : tests) {
    Json e{{"ordinal", t.ordinal}, {"call", t.call_expression}};
    if (t.expected_value) e["expected"] = *t.expected_value;
    list.push_back(std::move(e));
  }
  return Json{{"source", source}, {"tests", std::move(list)}, {"timeout_ms", timeout_ms}};
}

Json to_json(const TestOutcome& o) {
  Json j{{"ordinal", o.ordinal}, {"status", std::string(to_string(o.status))}};
  if (o.actual) j["actual"] = *o.actual;
  if (o.error_type) j["error_type"] = *o.error_type;
  if (o.line) j["line"] = *o.line;
  if (o.message) j["message"] = *o.message;
  j["duration_ms"] = o.duration_ms;
  return j;
}

Json to_json(const ExecutionReport& r) {
  Json tests = Json::array();
  for (const auto& o : r.outcomes) tests.push_back(to_json(o));
  Json j{{"tests", std::move(tests)}};
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

namespace {

TestOutcome outcome_from_json(const Json& j, const std::string& path) {
  jsonl::ObjectReader r(j, path);
  TestOutcome o;
  o.ordinal = static_cast<int>(r.integer("ordinal"));
  try {
    o.status = parse_test_status(r.str("status"));
  } catch (const DataError& e) {
    throw DataError(r.field("status"), e.detail());
  }
  o.actual = r.opt_str("actual");
  o.error_type = r.opt_str("error_type");
  if (auto line = r.opt_integer("line")) o.line = static_cast<int>(*line);
  o.message = r.opt_str("message");
  if (auto d = r.opt_number("duration_ms")) o.duration_ms = static_cast<long>(*d);
  r.finish();
  return o;
}

}  // namespace

ExecutionReport execution_report_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  ExecutionReport report;
  const Json& tests = r.any("tests");
  if (!tests.is_array()) throw DataError("tests", "expected an array");
  for (std::size_t i = 0; i < tests.size(); ++i) {
    report.outcomes.push_back(outcome_from_json(tests[i], "tests[" + std::to_string(i) + "]"));
  }
  if (r.opt_any("warnings")) report.warnings = r.str_list("warnings");
  r.finish();
  return report;
}

ExecutionReport parse_report(const Json& reply, std::span<const TestCase> tests) {
  ExecutionReport report = execution_report_from_json(reply);
  if (report.outcomes.size() != tests.size()) {
    throw DataError("tests", "runner reported " + std::to_string(report.outcomes.size()) + " outcomes for " +
                                 std::to_string(tests.size()) + " tests");
  }
  bool any_syntax = false;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    if (report.outcomes[i].ordinal != tests[i].ordinal) {
      throw DataError("tests[" + std::to_string(i) + "].ordinal", "does not match the job");
    }
    any_syntax |= report.outcomes[i].status == TestStatus::syntax;
  }
  if (any_syntax && std::any_of(report.outcomes.begin(), report.outcomes.end(),
                                [](const TestOutcome& o) { return o.status != TestStatus::syntax; })) {
    throw DataError("tests", "a syntax error must fail every test");
  }
  return report;
}

namespace {

class ScratchDir {
 public:
  ScratchDir() {
    std::string templ = (std::filesystem::temp_directory_path() / "socdbg-run-XXXXXX").string();
    if (!::mkdtemp(templ.data())) throw InfrastructureError("cannot create a scratch directory");
    path_ = templ;
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace

ExecutionReport run_tests(std::string_view source, std::span<const TestCase> tests, const SandboxOptions& options) {
  if (options.timeout_ms <= 0) throw PreconditionError("timeout_ms must be positive");
  if (tests.empty()) {
    ExecutionReport empty;
    empty.warnings.push_back("no unit tests; the sample counts as passing");
    return empty;
  }
  if (options.runner.empty()) throw InfrastructureError("no sandbox runner configured");
  if (!std::filesystem::exists(options.runner)) {
    throw InfrastructureError("sandbox runner not found: " + options.runner.string());
  }
  const auto python = find_executable(options.python);
  if (!python) throw InfrastructureError("python interpreter not found: " + options.python);

  ScratchDir scratch;
  ProcessRequest req;
  req.argv = {python->string(), "-I", "-S", "-B", std::filesystem::absolute(options.runner).string()};
  req.stdin_data = make_job(source, tests, options.timeout_ms).dump();
  req.env = {"PATH=/usr/bin:/bin", "LANG=C.UTF-8", "PYTHONIOENCODING=utf-8", "PYTHONHASHSEED=0",
             "HOME=" + scratch.path().string()};
  req.cwd = scratch.path();
  req.deadline = std::chrono::milliseconds(options.timeout_ms + options.grace_ms);
  req.limits = options.limits;
  if (!req.limits.cpu_seconds) req.limits.cpu_seconds = (options.timeout_ms + options.grace_ms) / 1000 + 1;

  const ProcessResult run = run_process(req);
  if (run.timed_out || (run.signal && *run.signal == SIGXCPU)) {
    // The runner never got to report: every test is charged with the timeout.
    ExecutionReport report;
    for (const auto& t : tests) {
      TestOutcome o;
      o.ordinal = t.ordinal;
      o.status = TestStatus::timeout;
      o.duration_ms = run.elapsed.count();
      report.outcomes.push_back(o);
    }
    report.warnings.push_back("sandbox killed after " + std::to_string(run.elapsed.count()) + " ms");
    return report;
  }
  if (run.exit_code != 0) {
    std::string why = run.exit_code ? "exit code " + std::to_string(*run.exit_code)
                                    : "signal " + std::to_string(run.signal.value_or(0));
    throw InfrastructureError("sandbox runner failed (" + why + "): " + run.stderr_data);
  }
  try {
    return parse_report(Json::parse(run.stdout_data), tests);
  } catch (const Json::exception& e) {
    throw InfrastructureError(std::string("sandbox runner produced invalid JSON: ") + e.what());
  } catch (const DataError& e) {
    throw InfrastructureError(std::string("sandbox runner produced a malformed report: ") + e.what());
  }
}

std::vector<ExecutionResult> run_tests_batch(std::span<const ExecutionJob> jobs, const SandboxOptions& options,
                                             int concurrency) {
  std::vector<ExecutionResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i].report = run_tests(jobs[i].source, jobs[i].tests, options);
      } catch (const Error& e) {
        results[i].error = e.what();
      }
    }
  };
  const int n = std::clamp<int>(concurrency, 1, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

bool is_buggy(const ExecutionReport& report) {
  return std::any_of(report.outcomes.begin(), report.outcomes.end(),
                     [](const TestOutcome& o) { return o.status != TestStatus::passed; });
}

std::pair<std::size_t, double> argument_simplicity(std::string_view call) {
  std::string_view args = call;
  const auto open = call.find('(');
  const auto close = call.rfind(')');
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    args = call.substr(open + 1, close - open - 1);
  }
  while (!args.empty() && std::isspace(static_cast<unsigned char>(args.front()))) args.remove_prefix(1);
  while (!args.empty() && std::isspace(static_cast<unsigned char>(args.back()))) args.remove_suffix(1);

  static const std::regex number(R"((^|[^\w.])(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?))");
  std::match_results<std::string_view::const_iterator> m;
  double magnitude = 0.0;
  if (std::regex_search(args.begin(), args.end(), m, number)) magnitude = std::fabs(std::stod(m[2].str()));
  return {args.size(), magnitude};
}

namespace {

int priority(TestStatus s) {
  switch (s) {
    case TestStatus::syntax: return 0;
    case TestStatus::runtime: return 1;
    case TestStatus::logical: return 2;
    case TestStatus::timeout: return 3;
    case TestStatus::passed: return 4;
  }
  return 4;
}

}  // namespace

SelectedFailure select_simplest_failure(const ExecutionReport& report, std::span<const TestCase> tests) {
  if (!is_buggy(report)) throw PreconditionError("no failing test to select");
  std::optional<std::size_t> best;
  auto key = [&](std::size_t i) {
    const auto& o = report.outcomes[i];
    std::pair<std::size_t, double> simple{0, 0.0};
    if (o.status != TestStatus::syntax) {
      auto it = std::find_if(tests.begin(), tests.end(), [&](const TestCase& t) { return t.ordinal == o.ordinal; });
      if (it != tests.end()) simple = argument_simplicity(it->call_expression);
    }
    return std::make_tuple(priority(o.status), simple.first, simple.second, o.ordinal);
  };
  for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
    if (report.outcomes[i].status == TestStatus::passed) continue;
    if (!best || key(i) < key(*best)) best = i;
  }
  const TestOutcome& o = report.outcomes[*best];
  auto it = std::find_if(tests.begin(), tests.end(), [&](const TestCase& t) { return t.ordinal == o.ordinal; });
  if (it == tests.end()) throw PreconditionError("report names test " + std::to_string(o.ordinal) + " which is not in the list");
  return {*it, o};
}

FailedTestDescription describe_selected(const SelectedFailure& f) {
  FailedTestDescription d;
  d.call_expression = f.test.call_expression;
  switch (f.outcome.status) {
    case TestStatus::logical:
      d.kind = FailureKind::logical;
      d.actual = f.outcome.actual;
      d.expected = f.test.expected_value;
      break;
    case TestStatus::runtime:
      d.kind = FailureKind::runtime;
      d.error_type = f.outcome.error_type;
      d.line = f.outcome.line;
      break;
    case TestStatus::syntax:
      d.kind = FailureKind::syntax;
      d.line = f.outcome.line;
      break;
    case TestStatus::timeout:
      // No template exists for non-termination; it is reported as the
      // exception the interrupted call saw.
      d.kind = FailureKind::runtime;
      d.error_type = "TimeoutError";
      d.line = f.outcome.line;
      break;
    case TestStatus::passed:
      throw PreconditionError("test " + std::to_string(f.outcome.ordinal) + " passed");
  }
  d.sentence = render_convention(d);
  return d;
}

std::string render_convention(const FailedTestDescription& f) {
  auto need = [](const auto& field, const char* name) -> decltype(auto) {
    if (!field) throw DataError(std::string("failed_test.") + name, "required by the sentence template");
    return *field;
  };
  const std::string head = "When called as " + f.call_expression + ", the function ";
  switch (f.kind) {
    case FailureKind::logical:
      return head + "returns " + need(f.actual, "actual") + "; whereas the expected result is " +
             need(f.expected, "expected") + ".";
    case FailureKind::runtime:
      return head + "raises " + need(f.error_type, "error_type") + " on line " + std::to_string(need(f.line, "line")) +
             ".";
    case FailureKind::syntax:
      return head + "produces a SyntaxError on line " + std::to_string(need(f.line, "line")) + ".";
  }
  return head;
}

std::optional<FailedTestDescription> parse_convention(std::string_view sentence) {
  static const std::regex logical(R"(^When called as (.+?), the function returns (.+); whereas the expected result is (.+)\.$)");
  static const std::regex runtime(R"(^When called as (.+?), the function raises ([A-Za-z_][\w.]*) on line (\d+)\.$)");
  static const std::regex syntax(R"(^When called as (.+?), the function produces a SyntaxError on line (\d+)\.$)");
  std::string text(sentence);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.erase(0, 1);
  std::smatch m;
  auto line_number = [](const std::string& digits) -> std::optional<int> {
    if (digits.size() > 9) return std::nullopt;
    return std::stoi(digits);
  };
  FailedTestDescription f;
  f.sentence = text;
  if (std::regex_match(text, m, syntax)) {
    f.kind = FailureKind::syntax;
    f.call_expression = m[1];
    f.line = line_number(m[2]);
    if (!f.line) return std::nullopt;
  } else if (std::regex_match(text, m, runtime)) {
    f.kind = FailureKind::runtime;
    f.call_expression = m[1];
    f.error_type = m[2];
    f.line = line_number(m[3]);
    if (!f.line) return std::nullopt;
  } else if (std::regex_match(text, m, logical)) {
    f.kind = FailureKind::logical;
    f.call_expression = m[1];
    f.actual = m[2];
    f.expected = m[3];
  } else {
    return std::nullopt;
  }
  return f;
}

}  // namespace socdbg
