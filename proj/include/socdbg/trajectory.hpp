#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "socdbg/gateway.hpp"
#include "socdbg/model.hpp"

namespace socdbg {

struct RtStep {
  int number = 0;  // k in "A.k"
  std::string text;
  std::set<int> cited;  // numbers of earlier steps cited as (A.j)

  std::string label() const { return "A." + std::to_string(number); }
  bool operator==(const RtStep&) const = default;
};

/// Who produced an artifact and with which prompt assets.
struct GenerationMeta {
  std::string config_id;
  std::string prompt_version;
  int attempts = 1;
  std::optional<std::string> reasoning_trace;

  bool operator==(const GenerationMeta&) const = default;
};

/// A failed generation keeps its sample id and error so that it still counts
/// in benchmark denominators; its steps are empty.
struct ReasoningTrajectory {
  std::string sample_id;
  std::vector<RtStep> steps;
  GenerationMeta meta;
  std::optional<std::string> error;

  bool ok() const { return !error; }
  bool operator==(const ReasoningTrajectory&) const = default;
};

/// Grammar violation in model output. `label` names the offending or
/// missing step when there is one; `line` is 1-based.
class RtParseError : public Error {
 public:
  RtParseError(const std::string& message, std::optional<std::string> label = {}, std::optional<int> line = {})
      : Error(message), label_(std::move(label)), line_(line) {}
  const std::optional<std::string>& label() const noexcept { return label_; }
  std::optional<int> line() const noexcept { return line_; }

 private:
  std::optional<std::string> label_;
  std::optional<int> line_;
};

/// Citation tokens in a step body: "(A.3)", "(A.1, A.2)", "(Step A.4)".
std::set<int> extract_citations(std::string_view text);

/// Steps only; metadata is left empty.
std::vector<RtStep> parse_rt(std::string_view text);
std::string render_rt(const std::vector<RtStep>& steps);

/// Structural invariants of an accepted trajectory. Empty means valid.
std::vector<Violation> validate_rt(const std::vector<RtStep>& steps);

std::string build_rt_prompt(const DebugSample& sample);
std::string rt_prompt_version();

/// Generates and parses; on a grammar violation re-prompts once with the
/// format reminder. Throws RtParseError on the second violation and
/// ProviderError when generation fails.
ReasoningTrajectory generate_rt(Gateway& gateway, const DebugSample& sample, std::string_view config_id);
/// Never throws Error: a failure becomes a failed trajectory.
ReasoningTrajectory try_generate_rt(Gateway& gateway, const DebugSample& sample, std::string_view config_id);
/// Attempts spent before `e` was raised: two for a rejected re-prompt, else one.
int failed_attempts(const std::exception& e);

Json to_json(const RtStep& s);
Json to_json(const GenerationMeta& m);
Json to_json(const ReasoningTrajectory& rt);
ReasoningTrajectory trajectory_from_json(const Json& j);
std::vector<ReasoningTrajectory> load_trajectories(const std::filesystem::path& path);
void save_trajectories(std::span<const ReasoningTrajectory> rts, const std::filesystem::path& path);

// Shared by the conversation and judge prompts.
std::string misconception_text(const DebugSample& sample);
std::string failed_test_text(const DebugSample& sample);

}  // namespace socdbg
