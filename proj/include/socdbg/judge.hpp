#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "socdbg/conversation.hpp"

namespace socdbg {

struct RtCategories {
  bool logical_soundness = false;
  bool step_construction_and_precision = false;
  bool formatting_and_focus = false;

  bool all() const { return logical_soundness && step_construction_and_precision && formatting_and_focus; }
  bool operator==(const RtCategories&) const = default;
};

struct TurnCriteria {
  bool prompts_correct_inference = false;
  bool does_not_state_inference = false;

  bool all() const { return prompts_correct_inference && does_not_state_inference; }
  bool operator==(const TurnCriteria&) const = default;
};

/// Provenance shared by both verdict kinds. A verdict whose judging failed
/// carries `error` and counts as invalid.
struct VerdictMeta {
  std::string sample_id;
  std::string config_id;  // configuration that generated the judged artifact
  std::string judge_config_id;
  std::string prompt_version;
  int attempts = 1;
  std::optional<std::string> error;

  bool operator==(const VerdictMeta&) const = default;
};

struct RtVerdict {
  VerdictMeta meta;
  bool valid = false;
  RtCategories categories;
  std::string comments;
  std::string feedback;

  bool operator==(const RtVerdict&) const = default;
};

struct TurnVerdict {
  VerdictMeta meta;
  int turn_index = 0;  // index into Conversation::turns
  int step = 0;        // aligned RT step
  bool valid = false;
  TurnCriteria criteria;
  std::string comments;
  std::string feedback;

  bool operator==(const TurnVerdict&) const = default;
};

/// Malformed judge output. `key` names the offending JSON key when known.
class VerdictParseError : public Error {
 public:
  VerdictParseError(const std::string& message, std::optional<std::string> key = {})
      : Error(message), key_(std::move(key)) {}
  const std::optional<std::string>& key() const noexcept { return key_; }

 private:
  std::optional<std::string> key_;
};

/// First well-formed JSON object in `text`, which may wrap it in prose or a
/// code fence.
std::optional<Json> extract_json_object(std::string_view text);

enum class VerdictKind { rt, turn };

/// Only the verdict body is filled; meta is left empty. Throws
/// VerdictParseError for missing/unknown keys, wrong types and a `valid`
/// that disagrees with the conjunction of the scores.
RtVerdict parse_rt_verdict(std::string_view text);
TurnVerdict parse_turn_verdict(std::string_view text);
std::variant<RtVerdict, TurnVerdict> parse_verdict(std::string_view text, VerdictKind kind);

std::string build_judge_rt_prompt(const DebugSample& sample, const ReasoningTrajectory& rt);
std::string build_judge_turn_prompt(const DebugSample& sample, const ReasoningTrajectory& rt,
                                    const Conversation& conversation, std::size_t turn_index);
std::string judge_rt_prompt_version();
std::string judge_turn_prompt_version();

/// One re-prompt on a malformed verdict, then VerdictParseError.
RtVerdict judge_rt(Gateway& gateway, const DebugSample& sample, const ReasoningTrajectory& rt,
                   std::string_view judge_config);
/// Never throws Error: a failure becomes an error verdict.
RtVerdict try_judge_rt(Gateway& gateway, const DebugSample& sample, const ReasoningTrajectory& rt,
                       std::string_view judge_config);
TurnVerdict judge_turn(Gateway& gateway, const DebugSample& sample, const ReasoningTrajectory& rt,
                       const Conversation& conversation, std::size_t turn_index, std::string_view judge_config);

/// Judges every aligned Teacher turn; failures become error verdicts.
std::vector<TurnVerdict> judge_conversation(Gateway& gateway, const DebugSample& sample,
                                            const ReasoningTrajectory& rt, const Conversation& conversation,
                                            std::string_view judge_config, int jobs = 1);

struct ConversationValidity {
  bool conversation_valid = false;
  int grounded = 0;
  int total = 0;

  bool operator==(const ConversationValidity&) const = default;
};

/// Throws PreconditionError for an empty verdict list.
ConversationValidity conversation_validity(std::span<const TurnVerdict> verdicts);

/// Structural check of a stored verdict.
std::vector<Violation> validate_verdict(const RtVerdict& v);
std::vector<Violation> validate_verdict(const TurnVerdict& v);

Json to_json(const RtVerdict& v);
Json to_json(const TurnVerdict& v);

struct VerdictSet {
  std::vector<RtVerdict> rt;
  std::vector<TurnVerdict> turns;
};
VerdictSet verdicts_from_jsonl(const std::filesystem::path& path);
void save_verdicts(const VerdictSet& set, const std::filesystem::path& path);

/// Stable item ids used to join judge verdicts with human labels.
std::string item_id(const RtVerdict& v);
std::string item_id(const TurnVerdict& v);

}  // namespace socdbg
