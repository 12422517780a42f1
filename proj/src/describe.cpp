#include "socdbg/describe.hpp"

#include "socdbg/prompts.hpp"

namespace socdbg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

const TestCase* find_test(std::span<const TestCase> tests, int ordinal) {
  for (const auto& t : tests)
    if (t.ordinal == ordinal) return &t;
  return nullptr;
}

bool consistent(const FailedTestDescription& d, const TestOutcome& o, const TestCase& t) {
  switch (d.kind) {
    case FailureKind::syntax:
      return o.status == TestStatus::syntax && d.line == o.line;
    case FailureKind::runtime:
      if (o.status == TestStatus::timeout) return d.error_type == "TimeoutError" && d.line == o.line;
      return o.status == TestStatus::runtime && d.error_type == o.error_type && d.line == o.line;
    case FailureKind::logical:
      return o.status == TestStatus::logical && d.actual == o.actual && d.expected == t.expected_value;
  }
  return false;
}

}  // namespace

std::string format_execution_results(const ExecutionReport& report, std::span<const TestCase> tests) {
  std::string out;
  for (const auto& o : report.outcomes) {
    const TestCase* t = find_test(tests, o.ordinal);
    if (!t) throw PreconditionError("report names unknown test " + std::to_string(o.ordinal));
    out += "Test " + std::to_string(o.ordinal) + ": " + t->call_expression + " -> ";
    const std::string line = o.line ? " on line " + std::to_string(*o.line) : "";
    switch (o.status) {
      case TestStatus::passed: out += "PASSED"; break;
      case TestStatus::logical:
        out += "LOGICAL ERROR: returned " + o.actual.value_or("?") + ", expected " + t->expected_value.value_or("?");
        break;
      case TestStatus::runtime: out += "RUNTIME ERROR: " + o.error_type.value_or("Exception") + line; break;
      case TestStatus::syntax: out += "SYNTAX ERROR" + line; break;
      case TestStatus::timeout: out += "TIMEOUT" + line; break;
    }
    out += "\n";
  }
  return out;
}

std::string build_failure_prompt(std::string_view problem, std::string_view source, const ExecutionReport& report,
                                 std::span<const TestCase> tests) {
  std::string results = format_execution_results(report, tests);
  if (!results.empty() && results.back() == '\n') results.pop_back();
  return prompts::fill(prompts::asset("failure_description.txt"), {{"problem", std::string(problem)},
                                                                    {"bug_code", std::string(source)},
                                                                    {"execution_results", results}});
}

std::string failure_prompt_version() { return prompts::version({"failure_description.txt"}); }

std::optional<std::string> check_description(const FailedTestDescription& failure, const ExecutionReport& report,
                                             std::span<const TestCase> tests) {
  bool call_seen = false;
  for (const auto& o : report.outcomes) {
    const TestCase* t = find_test(tests, o.ordinal);
    if (!t || t->call_expression != failure.call_expression) continue;
    call_seen = true;
    if (o.status != TestStatus::passed && consistent(failure, o, *t)) return std::nullopt;
  }
  if (!call_seen) return "no test is called as " + failure.call_expression;
  return "the description of " + failure.call_expression + " disagrees with the execution results";
}

DescribeOutcome describe_failure(Gateway& gateway, std::string_view config_id, std::string_view problem,
                                 std::string_view source, const ExecutionReport& report,
                                 std::span<const TestCase> tests) {
  const FailedTestDescription fallback = describe_selected(select_simplest_failure(report, tests));
  DescribeOutcome out;
  out.prompt_version = failure_prompt_version();

  GenerationRequest request{build_failure_prompt(problem, source, report, tests), std::string(config_id),
                            "describe", std::nullopt};
  GenerationResponse response;
  try {
    response = gateway.generate(request);
  } catch (const ProviderError& e) {
    throw DescribeError(std::string("failure description unavailable: ") + e.what(), fallback);
  }

  std::string sentence = trim(response.text);
  if (sentence.rfind("Answer:", 0) == 0) sentence = trim(sentence.substr(7));
  auto parsed = parse_convention(sentence);
  std::optional<std::string> reason;
  if (!parsed)
    reason = "the answer does not follow the description conventions";
  else
    reason = check_description(*parsed, report, tests);

  if (reason) {
    out.description = fallback;
    out.fallback = true;
    out.fallback_reason = reason;
  } else {
    out.description = *parsed;
  }
  return out;
}

}  // namespace socdbg
