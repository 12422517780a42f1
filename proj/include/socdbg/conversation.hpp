#pragma once

#include <optional>
#include <string>
#include <vector>

#include "socdbg/trajectory.hpp"

namespace socdbg {

enum class Speaker { teacher, student };
std::string_view to_string(Speaker s);

struct Turn {
  Speaker speaker = Speaker::teacher;
  std::string text;  // annotation stripped
  // RT step the exchange covers; absent for the opening exchange. A Student
  // turn shares the step of the Teacher turn it answers.
  std::optional<int> aligned_step;

  bool operator==(const Turn&) const = default;
};

struct Conversation {
  std::string sample_id;
  std::vector<Turn> turns;
  GenerationMeta meta;
  std::optional<std::string> error;

  bool ok() const { return !error; }
  bool operator==(const Conversation&) const = default;
};

class ConversationParseError : public Error {
 public:
  ConversationParseError(const std::string& message, std::optional<std::string> label = {},
                         std::optional<int> line = {})
      : Error(message), label_(std::move(label)), line_(line) {}
  const std::optional<std::string>& label() const noexcept { return label_; }
  std::optional<int> line() const noexcept { return line_; }

 private:
  std::optional<std::string> label_;
  std::optional<int> line_;
};

/// Splits on "Teacher:" / "Student:" labels and aligns Teacher turns to the
/// `step_count` RT steps, from trailing [A.k] annotations when present and
/// by position otherwise.
std::vector<Turn> parse_conversation(std::string_view text, int step_count);

enum class RenderMode { annotated, plain };
std::string render_conversation(const std::vector<Turn>& turns, RenderMode mode = RenderMode::annotated);

/// Teacher-first, alternation, one Student answer per Teacher turn, and every
/// step aligned to exactly one Teacher turn. Empty means valid.
std::vector<Violation> validate_conversation(const std::vector<Turn>& turns, int step_count);

/// Indices of Teacher turns with an aligned step, in order.
std::vector<std::size_t> aligned_teacher_turns(const std::vector<Turn>& turns);

std::string build_sc_prompt(const DebugSample& sample, const ReasoningTrajectory& rt);
std::string sc_prompt_version();

/// Throws ConversationParseError after one failed re-prompt and
/// ProviderError when generation fails.
Conversation generate_conversation(Gateway& gateway, const DebugSample& sample, const ReasoningTrajectory& rt,
                                   std::string_view config_id);
/// Never throws Error: a failure, or a failed trajectory, becomes a failed
/// conversation.
Conversation try_generate_conversation(Gateway& gateway, const DebugSample& sample, const ReasoningTrajectory& rt,
                                       std::string_view config_id);

Json to_json(const Turn& t);
Json to_json(const Conversation& c);
Conversation conversation_from_json(const Json& j);
std::vector<Conversation> load_conversations(const std::filesystem::path& path);
void save_conversations(std::span<const Conversation> cs, const std::filesystem::path& path);

}  // namespace socdbg
