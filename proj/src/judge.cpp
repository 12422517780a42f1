#include "socdbg/judge.hpp"

#include <regex>

#include "socdbg/jsonl.hpp"
#include "socdbg/parallel.hpp"
#include "socdbg/prompts.hpp"

namespace socdbg {

namespace {

std::string label(int k) { return "A." + std::to_string(k); }

std::string code_block(const std::string& code) {
  std::string out = "\n" + code;
  if (out.back() != '\n') out += "\n";
  return out;
}

std::string rt_block(const ReasoningTrajectory& rt) {
  std::string s = render_rt(rt.steps);
  if (!s.empty()) s.pop_back();
  return s;
}

Json extract_or_throw(std::string_view text) {
  auto obj = extract_json_object(text);
  if (!obj) throw VerdictParseError("no JSON object in the judge output");
  return *obj;
}

void check_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& prefix) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw VerdictParseError("unknown key '" + prefix + key + "'", prefix + key);
  }
  for (const char* a : allowed)
    if (!obj.contains(a)) throw VerdictParseError("missing key '" + prefix + a + "'", prefix + a);
}

bool get_bool(const Json& obj, const char* key, const std::string& prefix) {
  const Json& v = obj.at(key);
  if (!v.is_boolean()) throw VerdictParseError("'" + prefix + key + "' must be true or false", prefix + key);
  return v.get<bool>();
}

std::string get_string(const Json& obj, const char* key) {
  const Json& v = obj.at(key);
  if (!v.is_string()) throw VerdictParseError(std::string("'") + key + "' must be a string", key);
  return v.get<std::string>();
}

const Json& get_object(const Json& obj, const char* key) {
  const Json& v = obj.at(key);
  if (!v.is_object()) throw VerdictParseError(std::string("'") + key + "' must be an object", key);
  return v;
}

template <class Verdict, class Parse>
Verdict ask(Gateway& gateway, GenerationRequest request, Parse parse, int& attempts) {
  const std::string prompt = request.prompt;
  GenerationResponse response = gateway.generate(request);
  attempts = 1;
  try {
    return parse(response.text);
  } catch (const VerdictParseError& first) {
    request.prompt = prompt + prompts::fill(prompts::asset("judge_format_reminder.txt"), {{"error", first.what()}});
    response = gateway.generate(request);
    attempts = 2;
    try {
      return parse(response.text);
    } catch (const VerdictParseError& second) {
      throw VerdictParseError(std::string("after one re-prompt: ") + second.what(), second.key());
    }
  }
}

VerdictMeta meta_from(jsonl::ObjectReader& r) {
  VerdictMeta m;
  m.sample_id = r.str("sample_id");
  m.config_id = r.str("config_id");
  m.judge_config_id = r.str("judge_config_id");
  m.prompt_version = r.str("prompt_version");
  m.attempts = static_cast<int>(r.opt_integer("attempts").value_or(1));
  m.error = r.opt_str("error");
  return m;
}

void meta_to(Json& j, const VerdictMeta& m) {
  j["sample_id"] = m.sample_id;
  j["config_id"] = m.config_id;
  j["judge_config_id"] = m.judge_config_id;
  j["prompt_version"] = m.prompt_version;
  j["attempts"] = m.attempts;
  if (m.error) j["error"] = *m.error;
}

}  // namespace

std::optional<Json> extract_json_object(std::string_view text) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string_view::npos;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped)
          escaped = false;
        else if (c == '\\')
          escaped = true;
        else if (c == '"')
          in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) {
        end = i;
        break;
      }
    }
    if (end == std::string_view::npos) continue;
    Json j = Json::parse(text.substr(start, end - start + 1), nullptr, false);
    if (!j.is_discarded() && j.is_object()) return j;
  }
  return std::nullopt;
}

RtVerdict parse_rt_verdict(std::string_view text) {
  const Json obj = extract_or_throw(text);
  check_keys(obj, {"valid", "categories", "comments", "feedback"}, "");
  RtVerdict v;
  v.valid = get_bool(obj, "valid", "");
  const Json& cat = get_object(obj, "categories");
  check_keys(cat, {"logical_soundness", "step_construction_and_precision", "formatting_and_focus"}, "categories.");
  v.categories.logical_soundness = get_bool(cat, "logical_soundness", "categories.");
  v.categories.step_construction_and_precision = get_bool(cat, "step_construction_and_precision", "categories.");
  v.categories.formatting_and_focus = get_bool(cat, "formatting_and_focus", "categories.");
  v.comments = get_string(obj, "comments");
  v.feedback = get_string(obj, "feedback");
  if (v.valid != v.categories.all())
    throw VerdictParseError(std::string("\"valid\" is ") + (v.valid ? "true" : "false") +
                                " but the conjunction of the categories is " + (v.valid ? "false" : "true"),
                            "valid");
  return v;
}

TurnVerdict parse_turn_verdict(std::string_view text) {
  const Json obj = extract_or_throw(text);
  check_keys(obj, {"valid", "criteria_scores", "comments", "feedback"}, "");
  TurnVerdict v;
  v.valid = get_bool(obj, "valid", "");
  const Json& crit = get_object(obj, "criteria_scores");
  check_keys(crit, {"prompts_correct_inference", "does_not_state_inference"}, "criteria_scores.");
  v.criteria.prompts_correct_inference = get_bool(crit, "prompts_correct_inference", "criteria_scores.");
  v.criteria.does_not_state_inference = get_bool(crit, "does_not_state_inference", "criteria_scores.");
  v.comments = get_string(obj, "comments");
  v.feedback = get_string(obj, "feedback");
  if (v.valid != v.criteria.all())
    throw VerdictParseError(std::string("\"valid\" is ") + (v.valid ? "true" : "false") +
                                " but the conjunction of the criteria is " + (v.valid ? "false" : "true"),
                            "valid");
  return v;
}

std::variant<RtVerdict, TurnVerdict> parse_verdict(std::string_view text, VerdictKind kind) {
  if (kind == VerdictKind::rt) return parse_rt_verdict(text);
  return parse_turn_verdict(text);
}

std::string build_judge_rt_prompt(const DebugSample& sample, const ReasoningTrajectory& rt) {
  if (!rt.ok()) throw PreconditionError("trajectory for " + rt.sample_id + " failed: " + *rt.error);
  return prompts::fill(prompts::asset("judge_rt.txt"), {{"problem", sample.problem_description},
                                                       {"bug_code", code_block(sample.buggy_source)},
                                                       {"failed_test", failed_test_text(sample)},
                                                       {"misconception", misconception_text(sample)},
                                                       {"rt", rt_block(rt)}});
}

std::string build_judge_turn_prompt(const DebugSample& sample, const ReasoningTrajectory& rt,
                                    const Conversation& conversation, std::size_t turn_index) {
  if (!rt.ok() || !conversation.ok()) throw PreconditionError("cannot judge a failed generation");
  if (turn_index + 1 >= conversation.turns.size())
    throw PreconditionError("turn " + std::to_string(turn_index) + " has no Student response");
  const Turn& teacher = conversation.turns[turn_index];
  if (teacher.speaker != Speaker::teacher || !teacher.aligned_step)
    throw PreconditionError("turn " + std::to_string(turn_index) + " is not an aligned Teacher turn");
  const int step = *teacher.aligned_step;
  if (step < 1 || step > static_cast<int>(rt.steps.size()))
    throw PreconditionError(label(step) + " is not a step of the trajectory");
  const RtStep& target = rt.steps[static_cast<std::size_t>(step - 1)];
  return prompts::fill(prompts::asset("judge_turn.txt"),
                       {{"problem", sample.problem_description},
                        {"bug_code", code_block(sample.buggy_source)},
                        {"failed_test", failed_test_text(sample)},
                        {"misconception", misconception_text(sample)},
                        {"rt", rt_block(rt)},
                        {"target_step", "Step " + target.label() + ": " + target.text},
                        {"teacher_utterance", teacher.text},
                        {"student_response", conversation.turns[turn_index + 1].text}});
}

std::string judge_rt_prompt_version() { return prompts::version({"judge_rt.txt", "judge_format_reminder.txt"}); }
std::string judge_turn_prompt_version() {
  return prompts::version({"judge_turn.txt", "judge_format_reminder.txt"});
}

RtVerdict judge_rt(Gateway& gateway, const DebugSample& sample, const ReasoningTrajectory& rt,
                   std::string_view judge_config) {
  GenerationRequest request{build_judge_rt_prompt(sample, rt), std::string(judge_config),
                            "judge-rt/" + rt.meta.config_id + "/" + sample.id, std::nullopt};
  int attempts = 1;
  RtVerdict v = ask<RtVerdict>(gateway, std::move(request), parse_rt_verdict, attempts);
  v.meta = VerdictMeta{sample.id, rt.meta.config_id, std::string(judge_config), judge_rt_prompt_version(), attempts,
                       std::nullopt};
  return v;
}

TurnVerdict judge_turn(Gateway& gateway, const DebugSample& sample, const ReasoningTrajectory& rt,
                       const Conversation& conversation, std::size_t turn_index, std::string_view judge_config) {
  const std::string prompt = build_judge_turn_prompt(sample, rt, conversation, turn_index);
  const int step = *conversation.turns[turn_index].aligned_step;
  GenerationRequest request{prompt, std::string(judge_config),
                            "judge-turn/" + conversation.meta.config_id + "/" + sample.id + "/" + label(step),
                            std::nullopt};
  int attempts = 1;
  TurnVerdict v = ask<TurnVerdict>(gateway, std::move(request), parse_turn_verdict, attempts);
  v.meta = VerdictMeta{sample.id, conversation.meta.config_id, std::string(judge_config),
                       judge_turn_prompt_version(), attempts, std::nullopt};
  v.turn_index = static_cast<int>(turn_index);
  v.step = step;
  return v;
}

std::vector<TurnVerdict> judge_conversation(Gateway& gateway, const DebugSample& sample,
                                            const ReasoningTrajectory& rt, const Conversation& conversation,
                                            std::string_view judge_config, int jobs) {
  const auto turns = aligned_teacher_turns(conversation.turns);
  std::vector<TurnVerdict> out(turns.size());
  parallel_for(turns.size(), jobs, [&](std::size_t k) {
    try {
      out[k] = judge_turn(gateway, sample, rt, conversation, turns[k], judge_config);
    } catch (const Error& e) {
      TurnVerdict& v = out[k];
      v.meta = VerdictMeta{sample.id, conversation.meta.config_id, std::string(judge_config),
                           judge_turn_prompt_version(), 1, std::string(e.what())};
      v.turn_index = static_cast<int>(turns[k]);
      v.step = *conversation.turns[turns[k]].aligned_step;
    }
  });
  return out;
}

ConversationValidity conversation_validity(std::span<const TurnVerdict> verdicts) {
  if (verdicts.empty()) throw PreconditionError("conversation validity needs at least one aligned turn");
  ConversationValidity out;
  out.total = static_cast<int>(verdicts.size());
  for (const auto& v : verdicts)
    if (v.valid && !v.meta.error) ++out.grounded;
  out.conversation_valid = out.grounded == out.total;
  return out;
}

std::vector<Violation> validate_verdict(const RtVerdict& v) {
  std::vector<Violation> out;
  if (v.meta.error) {
    if (v.valid) out.push_back({"valid", "a failed judgement is never valid"});
  } else if (v.valid != v.categories.all()) {
    out.push_back({"valid", "must equal the conjunction of the categories"});
  }
  if (v.meta.sample_id.empty()) out.push_back({"sample_id", "must not be empty"});
  return out;
}

std::vector<Violation> validate_verdict(const TurnVerdict& v) {
  std::vector<Violation> out;
  if (v.meta.error) {
    if (v.valid) out.push_back({"valid", "a failed judgement is never valid"});
  } else if (v.valid != v.criteria.all()) {
    out.push_back({"valid", "must equal the conjunction of the criteria"});
  }
  if (v.meta.sample_id.empty()) out.push_back({"sample_id", "must not be empty"});
  if (v.step < 1) out.push_back({"step", "must name an RT step"});
  if (v.turn_index < 1 || v.turn_index % 2 != 0) out.push_back({"turn_index", "must be a non-opening Teacher turn"});
  return out;
}

Json to_json(const RtVerdict& v) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "rt";
  meta_to(j, v.meta);
  j["valid"] = v.valid;
  if (!v.meta.error) {
    j["categories"] = {{"logical_soundness", v.categories.logical_soundness},
                       {"step_construction_and_precision", v.categories.step_construction_and_precision},
                       {"formatting_and_focus", v.categories.formatting_and_focus}};
    j["comments"] = v.comments;
    j["feedback"] = v.feedback;
  }
  return j;
}

Json to_json(const TurnVerdict& v) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "turn";
  meta_to(j, v.meta);
  j["turn_index"] = v.turn_index;
  j["step"] = label(v.step);
  j["valid"] = v.valid;
  if (!v.meta.error) {
    j["criteria_scores"] = {{"prompts_correct_inference", v.criteria.prompts_correct_inference},
                            {"does_not_state_inference", v.criteria.does_not_state_inference}};
    j["comments"] = v.comments;
    j["feedback"] = v.feedback;
  }
  return j;
}

static RtVerdict rt_verdict_from_json(jsonl::ObjectReader& r) {
  RtVerdict v;
  v.meta = meta_from(r);
  v.valid = r.boolean("valid");
  if (!v.meta.error) {
    jsonl::ObjectReader c(r.any("categories"), "categories");
    v.categories.logical_soundness = c.boolean("logical_soundness");
    v.categories.step_construction_and_precision = c.boolean("step_construction_and_precision");
    v.categories.formatting_and_focus = c.boolean("formatting_and_focus");
    c.finish();
    v.comments = r.str("comments");
    v.feedback = r.str("feedback");
  }
  return v;
}

static TurnVerdict turn_verdict_from_json(jsonl::ObjectReader& r) {
  static const std::regex step_re(R"(A\.([1-9]\d{0,5}))");
  TurnVerdict v;
  v.meta = meta_from(r);
  v.turn_index = static_cast<int>(r.integer("turn_index"));
  const std::string step = r.str("step");
  std::smatch m;
  if (!std::regex_match(step, m, step_re)) throw DataError(r.field("step"), "expected A.k");
  v.step = std::stoi(m[1]);
  v.valid = r.boolean("valid");
  if (!v.meta.error) {
    jsonl::ObjectReader c(r.any("criteria_scores"), "criteria_scores");
    v.criteria.prompts_correct_inference = c.boolean("prompts_correct_inference");
    v.criteria.does_not_state_inference = c.boolean("does_not_state_inference");
    c.finish();
    v.comments = r.str("comments");
    v.feedback = r.str("feedback");
  }
  return v;
}

VerdictSet verdicts_from_jsonl(const std::filesystem::path& path) {
  VerdictSet set;
  for (const auto& record : jsonl::read(path)) {
    try {
      jsonl::ObjectReader r(record.value);
      if (r.integer("schema_version") != kSchemaVersion) throw DataError("schema_version", "unsupported version");
      const std::string kind = r.str("kind");
      std::vector<Violation> violations;
      if (kind == "rt") {
        set.rt.push_back(rt_verdict_from_json(r));
        violations = validate_verdict(set.rt.back());
      } else if (kind == "turn") {
        set.turns.push_back(turn_verdict_from_json(r));
        violations = validate_verdict(set.turns.back());
      } else {
        throw DataError("kind", "expected rt or turn");
      }
      r.finish();
      if (!violations.empty()) throw DataError(violations.front().field, violations.front().rule);
    } catch (const DataError& e) {
      throw e.at_line(record.line);
    }
  }
  return set;
}

void save_verdicts(const VerdictSet& set, const std::filesystem::path& path) {
  std::vector<Json> out;
  for (const auto& v : set.rt) out.push_back(to_json(v));
  for (const auto& v : set.turns) out.push_back(to_json(v));
  jsonl::write(path, out);
}

std::string item_id(const RtVerdict& v) { return "rt:" + v.meta.config_id + ":" + v.meta.sample_id; }
std::string item_id(const TurnVerdict& v) {
  return "turn:" + v.meta.config_id + ":" + v.meta.sample_id + ":" + label(v.step);
}


RtVerdict try_judge_rt(Gateway& gateway, const DebugSample& sample, const ReasoningTrajectory& rt,
                       std::string_view judge_config) {
  try {
    return judge_rt(gateway, sample, rt, judge_config);
  } catch (const Error& e) {
    RtVerdict v;
    v.meta = {sample.id, rt.meta.config_id, std::string(judge_config), judge_rt_prompt_version(), failed_attempts(e),
              std::string(e.what())};
    return v;
  }
}

}  // namespace socdbg
