#pragma once

#include <optional>
#include <span>
#include <string>

#include "socdbg/execution.hpp"
#include "socdbg/gateway.hpp"

namespace socdbg {

/// One line per test, in the format the description prompt documents.
std::string format_execution_results(const ExecutionReport& report, std::span<const TestCase> tests);

std::string build_failure_prompt(std::string_view problem, std::string_view source, const ExecutionReport& report,
                                 std::span<const TestCase> tests);
std::string failure_prompt_version();

/// Why `failure` is not a faithful account of a failing test in `report`;
/// nullopt when it is.
std::optional<std::string> check_description(const FailedTestDescription& failure, const ExecutionReport& report,
                                             std::span<const TestCase> tests);

struct DescribeOutcome {
  FailedTestDescription description;
  bool fallback = false;
  std::optional<std::string> fallback_reason;
  std::string prompt_version;
};

/// Raised when the provider fails for good; carries the deterministic
/// description so callers can still proceed.
class DescribeError : public Error {
 public:
  DescribeError(const std::string& message, FailedTestDescription fallback)
      : Error(message), fallback_(std::move(fallback)) {}
  const FailedTestDescription& fallback() const noexcept { return fallback_; }

 private:
  FailedTestDescription fallback_;
};

/// Asks the describer model for the sentence and parses it back. Output that
/// does not match a failing test falls back to select_simplest_failure +
/// render_convention. Throws PreconditionError when nothing failed.
DescribeOutcome describe_failure(Gateway& gateway, std::string_view config_id, std::string_view problem,
                                 std::string_view source, const ExecutionReport& report,
                                 std::span<const TestCase> tests);

}  // namespace socdbg
