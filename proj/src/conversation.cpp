#include "socdbg/conversation.hpp"

#include <algorithm>
#include <map>
#include <regex>

#include "socdbg/jsonl.hpp"
#include "socdbg/prompts.hpp"

namespace socdbg {

namespace {

const std::set<std::string, std::less<>> kOtherRoles = {"Instructor", "Tutor",  "Assistant", "User",
                                                         "Learner",    "Mentor", "Professor", "AI"};

std::string label(int k) { return "A." + std::to_string(k); }

std::string_view ltrim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::string rtrim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

struct Label {
  std::string role;
  std::string body;
};

// "Role: text", optionally with the role in markdown bold.
std::optional<Label> read_label(std::string_view line) {
  std::string_view s = ltrim(line);
  const bool bold = s.substr(0, 2) == "**";
  if (bold) s.remove_prefix(2);
  std::size_t n = 0;
  while (n < s.size() && std::isalpha(static_cast<unsigned char>(s[n]))) ++n;
  if (n == 0) return std::nullopt;
  std::string role(s.substr(0, n));
  s.remove_prefix(n);
  if (bold && s.substr(0, 2) == "**") s.remove_prefix(2);
  if (s.empty() || s.front() != ':') return std::nullopt;
  s.remove_prefix(1);
  if (bold && s.substr(0, 2) == "**") s.remove_prefix(2);
  return Label{std::move(role), std::string(ltrim(s))};
}

std::optional<Speaker> speaker_of(const std::string& role) {
  if (role == "Teacher") return Speaker::teacher;
  if (role == "Student") return Speaker::student;
  return std::nullopt;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (true) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

const std::regex& trailing_annotation() {
  static const std::regex re(R"(\s*\[A\.(\d{1,6})\]\s*$)");
  return re;
}

const std::regex& any_annotation() {
  static const std::regex re(R"(\[A\.\d+\])");
  return re;
}

std::string turn_name(std::size_t i) { return "turn " + std::to_string(i + 1); }

}  // namespace

std::string_view to_string(Speaker s) { return s == Speaker::teacher ? "Teacher" : "Student"; }

std::vector<Turn> parse_conversation(std::string_view text, int step_count) {
  struct Raw {
    Speaker speaker;
    std::string text;
    int line;
  };
  std::vector<Raw> raw;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    auto l = read_label(lines[i]);
    if (l) {
      if (auto sp = speaker_of(l->role)) {
        raw.push_back({*sp, l->body, line_no});
        continue;
      }
      if (kOtherRoles.count(l->role))
        throw ConversationParseError("unknown speaker label '" + l->role + "'", std::nullopt, line_no);
    }
    if (raw.empty()) {
      if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
      throw ConversationParseError("text before the first speaker label", std::nullopt, line_no);
    }
    raw.back().text += "\n" + lines[i];
  }
  if (raw.empty()) throw ConversationParseError("no Teacher: or Student: turns found");

  std::vector<Turn> turns;
  std::vector<bool> annotated;
  for (auto& r : raw) {
    Turn t{r.speaker, rtrim(std::move(r.text)), std::nullopt};
    std::smatch m;
    bool has = false;
    if (std::regex_search(t.text, m, trailing_annotation())) {
      if (r.speaker == Speaker::student)
        throw ConversationParseError("step annotation on a Student turn", label(std::stoi(m[1])), r.line);
      t.aligned_step = std::stoi(m[1]);
      t.text = rtrim(t.text.substr(0, static_cast<std::size_t>(m.position(0))));
      has = true;
    }
    if (std::regex_search(t.text, m, any_annotation()))
      throw ConversationParseError("step annotation inside an utterance; it belongs at the end of the Teacher turn",
                                   std::nullopt, r.line);
    if (t.text.empty()) throw ConversationParseError(std::string(to_string(r.speaker)) + " turn has no text",
                                                     std::nullopt, r.line);
    turns.push_back(std::move(t));
    annotated.push_back(has);
  }

  // Structure before alignment so the diagnostics name the first real problem.
  if (turns.front().speaker != Speaker::teacher)
    throw ConversationParseError("conversation must begin with a Teacher turn", std::nullopt, raw.front().line);
  for (std::size_t i = 1; i < turns.size(); ++i)
    if (turns[i].speaker == turns[i - 1].speaker)
      throw ConversationParseError("two consecutive " + std::string(to_string(turns[i].speaker)) + " turns (" +
                                       turn_name(i - 1) + " and " + turn_name(i) + ")",
                                   std::nullopt, raw[i].line);
  if (turns.back().speaker == Speaker::teacher)
    throw ConversationParseError("the last Teacher turn has no Student response", std::nullopt, raw.back().line);

  std::vector<std::size_t> teachers;
  for (std::size_t i = 0; i < turns.size(); i += 2) teachers.push_back(i);
  const bool any_annotated = std::find(annotated.begin(), annotated.end(), true) != annotated.end();

  if (any_annotated) {
    if (annotated[0])
      throw ConversationParseError("the opening Teacher turn must not carry a step annotation",
                                   label(*turns[0].aligned_step), raw[0].line);
    std::map<int, std::size_t> seen;
    for (std::size_t k = 1; k < teachers.size(); ++k) {
      const std::size_t i = teachers[k];
      if (!annotated[i])
        throw ConversationParseError("Teacher " + turn_name(i) + " has no step annotation", std::nullopt, raw[i].line);
      const int step = *turns[i].aligned_step;
      if (step < 1 || step > step_count)
        throw ConversationParseError(label(step) + " is not a step of the trajectory", label(step), raw[i].line);
      if (seen.count(step))
        throw ConversationParseError(label(step) + " is prompted by more than one Teacher turn", label(step),
                                     raw[i].line);
      seen[step] = i;
    }
    for (int k = 1; k <= step_count; ++k)
      if (!seen.count(k)) throw ConversationParseError("no Teacher turn is aligned to " + label(k), label(k));
  } else {
    if (static_cast<int>(teachers.size()) != step_count + 1)
      throw ConversationParseError(std::to_string(teachers.size()) + " Teacher turns cannot be aligned by position to " +
                                   std::to_string(step_count) + " steps (expected " +
                                   std::to_string(step_count + 1) + ")");
    for (std::size_t k = 1; k < teachers.size(); ++k) turns[teachers[k]].aligned_step = static_cast<int>(k);
  }
  for (std::size_t i = 1; i < turns.size(); i += 2) turns[i].aligned_step = turns[i - 1].aligned_step;
  return turns;
}

std::string render_conversation(const std::vector<Turn>& turns, RenderMode mode) {
  std::string out;
  for (const auto& t : turns) {
    out += std::string(to_string(t.speaker)) + ": " + t.text;
    if (mode == RenderMode::annotated && t.speaker == Speaker::teacher && t.aligned_step)
      out += " [" + label(*t.aligned_step) + "]";
    out += "\n";
  }
  return out;
}

std::vector<Violation> validate_conversation(const std::vector<Turn>& turns, int step_count) {
  std::vector<Violation> out;
  if (turns.empty()) {
    out.push_back({"turns", "must not be empty"});
    return out;
  }
  if (turns.front().speaker != Speaker::teacher) out.push_back({"turns[0].speaker", "must be Teacher"});
  if (turns.size() % 2 != 0) out.push_back({"turns", "every Teacher turn needs a Student response"});
  std::map<int, int> count;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const Turn& t = turns[i];
    const std::string field = "turns[" + std::to_string(i) + "]";
    if (i > 0 && t.speaker == turns[i - 1].speaker) out.push_back({field + ".speaker", "speakers must alternate"});
    if (t.text.empty() || t.text != rtrim(t.text) || std::isspace(static_cast<unsigned char>(t.text.front())))
      out.push_back({field + ".text", "must be non-empty and trimmed"});
    const auto lines = split_lines(t.text);
    for (std::size_t k = 1; k < lines.size(); ++k) {
      auto l = read_label(lines[k]);
      if (l && (speaker_of(l->role) || kOtherRoles.count(l->role)))
        out.push_back({field + ".text", "a continuation line looks like a speaker label"});
    }
    if (std::regex_search(t.text, any_annotation())) out.push_back({field + ".text", "contains a step annotation"});
    if (i == 0 && t.aligned_step) out.push_back({field + ".aligned_step", "the opener is not aligned"});
    if (t.speaker == Speaker::teacher && i > 0) {
      if (!t.aligned_step)
        out.push_back({field + ".aligned_step", "required after the opener"});
      else
        ++count[*t.aligned_step];
    }
    if (t.speaker == Speaker::student && i > 0 && t.aligned_step != turns[i - 1].aligned_step)
      out.push_back({field + ".aligned_step", "must match the Teacher turn it answers"});
  }
  for (const auto& [step, n] : count)
    if (step < 1 || step > step_count) out.push_back({"turns", label(step) + " is not a step of the trajectory"});
  for (int k = 1; k <= step_count; ++k)
    if (count[k] != 1) out.push_back({"turns", label(k) + " must be aligned to exactly one Teacher turn"});
  return out;
}

std::vector<std::size_t> aligned_teacher_turns(const std::vector<Turn>& turns) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < turns.size(); ++i)
    if (turns[i].speaker == Speaker::teacher && turns[i].aligned_step) out.push_back(i);
  return out;
}

std::string build_sc_prompt(const DebugSample& sample, const ReasoningTrajectory& rt) {
  if (!rt.ok()) throw PreconditionError("trajectory for " + rt.sample_id + " failed: " + *rt.error);
  std::string code = "\n" + sample.buggy_source;
  if (code.back() != '\n') code += "\n";
  std::string steps = render_rt(rt.steps);
  steps.pop_back();
  return prompts::fill(prompts::asset("sc_generation.txt"), {{"problem", sample.problem_description},
                                                            {"bug_code", code},
                                                            {"failed_test", failed_test_text(sample)},
                                                            {"misconception", misconception_text(sample)},
                                                            {"rt", steps}});
}

std::string sc_prompt_version() { return prompts::version({"sc_generation.txt", "sc_format_reminder.txt"}); }

Conversation generate_conversation(Gateway& gateway, const DebugSample& sample, const ReasoningTrajectory& rt,
                                   std::string_view config_id) {
  const std::string prompt = build_sc_prompt(sample, rt);
  const int n = static_cast<int>(rt.steps.size());
  GenerationRequest request{prompt, std::string(config_id), "sc/" + std::string(config_id) + "/" + sample.id, std::nullopt};

  Conversation c;
  c.sample_id = sample.id;
  c.meta.config_id = std::string(config_id);
  c.meta.prompt_version = sc_prompt_version();

  GenerationResponse response = gateway.generate(request);
  try {
    c.turns = parse_conversation(response.text, n);
  } catch (const ConversationParseError& first) {
    request.prompt = prompt + prompts::fill(prompts::asset("sc_format_reminder.txt"), {{"error", first.what()}});
    response = gateway.generate(request);
    c.meta.attempts = 2;
    try {
      c.turns = parse_conversation(response.text, n);
    } catch (const ConversationParseError& second) {
      throw ConversationParseError(std::string("after one re-prompt: ") + second.what(), second.label(),
                                   second.line());
    }
  }
  c.meta.reasoning_trace = response.reasoning;
  return c;
}

Json to_json(const Turn& t) {
  Json j{{"speaker", std::string(to_string(t.speaker))}, {"text", t.text}};
  if (t.aligned_step) j["aligned_step"] = label(*t.aligned_step);
  return j;
}

Json to_json(const Conversation& c) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["sample_id"] = c.sample_id;
  j["config_id"] = c.meta.config_id;
  j["prompt_version"] = c.meta.prompt_version;
  j["attempts"] = c.meta.attempts;
  if (c.meta.reasoning_trace) j["reasoning_trace"] = *c.meta.reasoning_trace;
  if (c.error) {
    j["error"] = *c.error;
  } else {
    Json turns = Json::array();
    for (const auto& t : c.turns) turns.push_back(to_json(t));
    j["turns"] = std::move(turns);
  }
  return j;
}

Conversation conversation_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  if (r.integer("schema_version") != kSchemaVersion) throw DataError("schema_version", "unsupported version");
  Conversation c;
  c.sample_id = r.str("sample_id");
  c.meta.config_id = r.str("config_id");
  c.meta.prompt_version = r.str("prompt_version");
  c.meta.attempts = static_cast<int>(r.opt_integer("attempts").value_or(1));
  c.meta.reasoning_trace = r.opt_str("reasoning_trace");
  c.error = r.opt_str("error");
  const Json* turns = r.opt_any("turns");
  if (c.error && turns) throw DataError("turns", "a failed conversation has no turns");
  if (!c.error) {
    if (!turns || !turns->is_array()) throw DataError("turns", "expected an array");
    static const std::regex step_re(R"(A\.([1-9]\d{0,5}))");
    for (std::size_t i = 0; i < turns->size(); ++i) {
      const std::string where = "turns[" + std::to_string(i) + "]";
      jsonl::ObjectReader t((*turns)[i], where);
      Turn turn;
      const std::string speaker = t.str("speaker");
      if (speaker == "Teacher")
        turn.speaker = Speaker::teacher;
      else if (speaker == "Student")
        turn.speaker = Speaker::student;
      else
        throw DataError(t.field("speaker"), "expected Teacher or Student");
      turn.text = t.str("text");
      if (auto step = t.opt_str("aligned_step")) {
        std::smatch m;
        if (!std::regex_match(*step, m, step_re)) throw DataError(t.field("aligned_step"), "expected A.k");
        turn.aligned_step = std::stoi(m[1]);
      }
      t.finish();
      c.turns.push_back(std::move(turn));
    }
    const int steps = static_cast<int>(aligned_teacher_turns(c.turns).size());
    auto violations = validate_conversation(c.turns, steps);
    if (!violations.empty()) throw DataError(violations.front().field, violations.front().rule);
  }
  r.finish();
  return c;
}

std::vector<Conversation> load_conversations(const std::filesystem::path& path) {
  return jsonl::read_as<Conversation>(path, conversation_from_json);
}

void save_conversations(std::span<const Conversation> cs, const std::filesystem::path& path) {
  std::vector<Json> out;
  for (const auto& c : cs) out.push_back(to_json(c));
  jsonl::write(path, out);
}


Conversation try_generate_conversation(Gateway& gateway, const DebugSample& sample, const ReasoningTrajectory& rt,
                                       std::string_view config_id) {
  const std::string config(config_id);
  if (!rt.ok()) return {sample.id, {}, {config, sc_prompt_version(), 0, std::nullopt}, "skipped: trajectory generation failed"};
  try {
    return generate_conversation(gateway, sample, rt, config_id);
  } catch (const Error& e) {
    return {sample.id, {}, {config, sc_prompt_version(), failed_attempts(e), std::nullopt}, e.what()};
  }
}

}  // namespace socdbg
