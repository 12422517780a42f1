#include "socdbg/trajectory.hpp"

#include <regex>

#include "socdbg/conversation.hpp"
#include "socdbg/jsonl.hpp"
#include "socdbg/prompts.hpp"

namespace socdbg {

namespace {

struct Header {
  int number;
  std::string body;
};

std::string rtrim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

std::string_view ltrim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

bool consume(std::string_view& s, std::string_view prefix) {
  if (s.substr(0, prefix.size()) != prefix) return false;
  s.remove_prefix(prefix.size());
  return true;
}

// "Step A.k:" with optional markdown bold around the label. Returns nullopt
// for ordinary lines; throws for a label whose number is malformed.
std::optional<Header> read_header(std::string_view line, int line_no) {
  std::string_view s = ltrim(line);
  const bool bold = consume(s, "**");
  if (!consume(s, "Step")) return std::nullopt;
  if (s.empty() || (s.front() != ' ' && s.front() != '\t')) return std::nullopt;
  s = ltrim(s);
  if (!consume(s, "A.")) return std::nullopt;
  std::size_t digits = 0;
  while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
  if (digits == 0) return std::nullopt;
  const std::string_view num = s.substr(0, digits);
  s.remove_prefix(digits);
  s = ltrim(s);
  if (!consume(s, ":")) return std::nullopt;
  if (bold) consume(s, "**");
  if (num.size() > 1 && num.front() == '0')
    throw RtParseError("malformed step label A." + std::string(num), std::nullopt, line_no);
  if (num.size() > 6) throw RtParseError("step number too large", std::nullopt, line_no);
  return Header{std::stoi(std::string(num)), std::string(ltrim(s))};
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
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

std::string label(int k) { return "A." + std::to_string(k); }

int label_number(const std::string& text, const std::string& field) {
  static const std::regex re(R"(A\.([1-9]\d{0,5}))");
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw DataError(field, "expected a label A.k, got '" + text + "'");
  return std::stoi(m[1]);
}

}  // namespace

std::set<int> extract_citations(std::string_view text) {
  static const std::regex group(
      R"(\(\s*((?:Step\s+)?A\.\d+(?:\s*(?:,|and|&)\s*(?:Step\s+)?A\.\d+)*)\s*\))");
  static const std::regex one(R"(A\.(\d+))");
  std::set<int> out;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), group); it != std::sregex_iterator(); ++it) {
    const std::string inner = (*it)[1];
    for (auto jt = std::sregex_iterator(inner.begin(), inner.end(), one); jt != std::sregex_iterator(); ++jt) {
      const std::string digits = (*jt)[1];
      if (digits.size() <= 6) out.insert(std::stoi(digits));
    }
  }
  return out;
}

std::vector<RtStep> parse_rt(std::string_view text) {
  const auto lines = split_lines(text);
  std::vector<RtStep> steps;
  std::vector<int> header_line;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    if (auto h = read_header(lines[i], line_no)) {
      const int expected = steps.empty() ? 1 : steps.back().number + 1;
      if (steps.empty() && h->number != 1)
        throw RtParseError("trajectory must start at A.1, found " + label(h->number), label(1), line_no);
      if (h->number > expected)
        throw RtParseError("gap in step labels: " + label(expected) + " is missing before " + label(h->number),
                           label(expected), line_no);
      if (h->number < expected)
        throw RtParseError(label(h->number) + " is out of order after " + label(expected - 1), label(h->number),
                           line_no);
      steps.push_back(RtStep{h->number, h->body, {}});
      header_line.push_back(line_no);
      continue;
    }
    if (steps.empty()) {
      if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
      throw RtParseError("text before the first step label; expected a line starting with \"Step A.1:\"",
                         label(1), line_no);
    }
    steps.back().text += "\n";
    steps.back().text += lines[i];
  }
  if (steps.empty()) throw RtParseError("no \"Step A.k:\" lines found", label(1));

  for (std::size_t i = 0; i < steps.size(); ++i) {
    RtStep& s = steps[i];
    s.text = rtrim(std::move(s.text));
    if (s.text.empty()) throw RtParseError(s.label() + " has no text", s.label(), header_line[i]);
    s.cited = extract_citations(s.text);
    for (int c : s.cited)
      if (c >= s.number)
        throw RtParseError(s.label() + " cites " + label(c) + ", which does not precede it", s.label(),
                           header_line[i]);
  }
  if (steps.size() < 2) throw RtParseError("a trajectory needs at least two steps", label(2));
  return steps;
}

std::string render_rt(const std::vector<RtStep>& steps) {
  std::string out;
  for (const auto& s : steps) {
    out += "Step " + s.label() + ": " + s.text;
    out += "\n";
  }
  return out;
}

std::vector<Violation> validate_rt(const std::vector<RtStep>& steps) {
  std::vector<Violation> out;
  if (steps.size() < 2) out.push_back({"steps", "at least two steps required"});
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const RtStep& s = steps[i];
    const std::string field = "steps[" + std::to_string(i) + "]";
    if (s.number != static_cast<int>(i) + 1) out.push_back({field + ".label", "expected " + label(i + 1)});
    if (s.text.empty()) {
      out.push_back({field + ".text", "must not be empty"});
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(s.text.front())) ||
        std::isspace(static_cast<unsigned char>(s.text.back())))
      out.push_back({field + ".text", "must not start or end with whitespace"});
    if (s.text.find('\r') != std::string::npos) out.push_back({field + ".text", "must not contain CR"});
    const auto lines = split_lines(s.text);
    for (std::size_t k = 1; k < lines.size(); ++k)
      if (read_header(lines[k], 0)) out.push_back({field + ".text", "a continuation line looks like a step label"});
    for (int c : s.cited)
      if (c < 1 || c >= s.number) out.push_back({field + ".cited_labels", label(c) + " does not precede the step"});
    if (s.cited != extract_citations(s.text))
      out.push_back({field + ".cited_labels", "must equal the citations in the text"});
  }
  return out;
}

std::string misconception_text(const DebugSample& sample) { return sample.misconception.description; }

std::string failed_test_text(const DebugSample& sample) {
  if (!sample.failed_test) throw PreconditionError("sample " + sample.id + " has no failed test description");
  return sample.failed_test->sentence;
}

static std::string block(const std::string& code) {
  std::string out = "\n" + code;
  if (out.back() != '\n') out += "\n";
  return out;
}

std::string build_rt_prompt(const DebugSample& sample) {
  return prompts::fill(prompts::asset("rt_generation.txt"), {{"problem", sample.problem_description},
                                                            {"bug_code", block(sample.buggy_source)},
                                                            {"failed_test", failed_test_text(sample)},
                                                            {"misconception", misconception_text(sample)}});
}

std::string rt_prompt_version() { return prompts::version({"rt_generation.txt", "rt_format_reminder.txt"}); }

ReasoningTrajectory generate_rt(Gateway& gateway, const DebugSample& sample, std::string_view config_id) {
  const std::string prompt = build_rt_prompt(sample);
  GenerationRequest request{prompt, std::string(config_id), "rt/" + std::string(config_id) + "/" + sample.id, std::nullopt};

  ReasoningTrajectory rt;
  rt.sample_id = sample.id;
  rt.meta.config_id = std::string(config_id);
  rt.meta.prompt_version = rt_prompt_version();

  GenerationResponse response = gateway.generate(request);
  try {
    rt.steps = parse_rt(response.text);
  } catch (const RtParseError& first) {
    request.prompt = prompt + prompts::fill(prompts::asset("rt_format_reminder.txt"), {{"error", first.what()}});
    response = gateway.generate(request);
    rt.meta.attempts = 2;
    try {
      rt.steps = parse_rt(response.text);
    } catch (const RtParseError& second) {
      throw RtParseError(std::string("after one re-prompt: ") + second.what(), second.label(), second.line());
    }
  }
  rt.meta.reasoning_trace = response.reasoning;
  return rt;
}

Json to_json(const RtStep& s) {
  Json cited = Json::array();
  for (int c : s.cited) cited.push_back(label(c));
  return Json{{"label", s.label()}, {"text", s.text}, {"cited_labels", std::move(cited)}};
}

Json to_json(const GenerationMeta& m) {
  Json j;
  j["config_id"] = m.config_id;
  j["prompt_version"] = m.prompt_version;
  j["attempts"] = m.attempts;
  if (m.reasoning_trace) j["reasoning_trace"] = *m.reasoning_trace;
  return j;
}

static GenerationMeta meta_from_json(jsonl::ObjectReader& r) {
  GenerationMeta m;
  m.config_id = r.str("config_id");
  m.prompt_version = r.str("prompt_version");
  m.attempts = static_cast<int>(r.opt_integer("attempts").value_or(1));
  if (m.attempts < 1) throw DataError(r.field("attempts"), "must be at least 1");
  m.reasoning_trace = r.opt_str("reasoning_trace");
  return m;
}

Json to_json(const ReasoningTrajectory& rt) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["sample_id"] = rt.sample_id;
  const Json meta = to_json(rt.meta);
  for (const auto& [k, v] : meta.items()) j[k] = v;
  if (rt.error) {
    j["error"] = *rt.error;
  } else {
    Json steps = Json::array();
    for (const auto& s : rt.steps) steps.push_back(to_json(s));
    j["steps"] = std::move(steps);
  }
  return j;
}

ReasoningTrajectory trajectory_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  if (r.integer("schema_version") != kSchemaVersion) throw DataError("schema_version", "unsupported version");
  ReasoningTrajectory rt;
  rt.sample_id = r.str("sample_id");
  rt.meta = meta_from_json(r);
  rt.error = r.opt_str("error");
  const Json* steps = r.opt_any("steps");
  if (rt.error && steps) throw DataError("steps", "a failed trajectory has no steps");
  if (!rt.error) {
    if (!steps || !steps->is_array()) throw DataError("steps", "expected an array");
    for (std::size_t i = 0; i < steps->size(); ++i) {
      const std::string where = "steps[" + std::to_string(i) + "]";
      jsonl::ObjectReader s((*steps)[i], where);
      RtStep step;
      step.number = label_number(s.str("label"), where + ".label");
      step.text = s.str("text");
      for (const auto& c : s.str_list("cited_labels")) step.cited.insert(label_number(c, where + ".cited_labels"));
      s.finish();
      rt.steps.push_back(std::move(step));
    }
    auto violations = validate_rt(rt.steps);
    if (!violations.empty()) throw DataError(violations.front().field, violations.front().rule);
  }
  r.finish();
  return rt;
}

std::vector<ReasoningTrajectory> load_trajectories(const std::filesystem::path& path) {
  return jsonl::read_as<ReasoningTrajectory>(path, trajectory_from_json);
}

void save_trajectories(std::span<const ReasoningTrajectory> rts, const std::filesystem::path& path) {
  std::vector<Json> out;
  for (const auto& rt : rts) out.push_back(to_json(rt));
  jsonl::write(path, out);
}


int failed_attempts(const std::exception& e) {
  return dynamic_cast<const RtParseError*>(&e) || dynamic_cast<const ConversationParseError*>(&e) ? 2 : 1;
}

ReasoningTrajectory try_generate_rt(Gateway& gateway, const DebugSample& sample, std::string_view config_id) {
  try {
    return generate_rt(gateway, sample, config_id);
  } catch (const Error& e) {
    return {sample.id, {}, {std::string(config_id), rt_prompt_version(), failed_attempts(e), std::nullopt}, e.what()};
  }
}

}  // namespace socdbg
