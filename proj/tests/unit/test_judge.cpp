#include <doctest.h>

#include <mutex>

#include "socdbg/judge.hpp"
#include "test_support.hpp"

using namespace socdbg;
using namespace socdbg::testing;

namespace {

DebugSample sample() {
  for (auto& s : load_dataset(fixture_path("samples/worked.jsonl")))
    if (s.id == "calculate_average") return s;
  throw std::runtime_error("missing fixture sample");
}

ReasoningTrajectory rt() {
  return {"calculate_average", parse_rt(fixture("conversations/precedence_rt.txt")),
          {"gpt-5-low", rt_prompt_version(), 1, std::nullopt}, std::nullopt};
}

Conversation conversation() {
  return {"calculate_average", parse_conversation(fixture("conversations/precedence_sc.txt"), 4),
          {"gpt-5-low", sc_prompt_version(), 1, std::nullopt}, std::nullopt};
}

const char* kValidRt = R"({"valid": true, "categories": {"logical_soundness": true,
  "step_construction_and_precision": true, "formatting_and_focus": true}, "comments": "ok", "feedback": "NONE"})";

std::string turn_json(bool a, bool b) {
  return std::string(R"({"valid": )") + (a && b ? "true" : "false") +
         R"(, "criteria_scores": {"prompts_correct_inference": )" + (a ? "true" : "false") +
         R"(, "does_not_state_inference": )" + (b ? "true" : "false") + R"(}, "comments": "c", "feedback": "f"})";
}

std::optional<std::string> key_of(std::string_view text, VerdictKind kind) {
  try {
    parse_verdict(text, kind);
  } catch (const VerdictParseError& e) {
    return e.key().value_or("<none>");
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("JSON object extraction tolerates wrappers") {
  CHECK(extract_json_object("```json\n{\"a\": 1}\n```")->at("a") == 1);
  CHECK(extract_json_object("Verdict: {\"s\": \"} {\"} done")->at("s") == "} {");
  CHECK(extract_json_object("{broken {\"b\": 2}")->at("b") == 2);
  CHECK_FALSE(extract_json_object("no object"));
  CHECK_FALSE(extract_json_object("[1, 2]"));
}

TEST_CASE("rt verdict parsing") {
  const auto v = parse_rt_verdict(std::string("Here you go:\n") + kValidRt);
  CHECK(v.valid);
  CHECK(v.categories.all());
  CHECK(v.feedback == "NONE");

  Json j = Json::parse(kValidRt);
  j["categories"]["formatting_and_focus"] = false;
  CHECK(key_of(j.dump(), VerdictKind::rt) == "valid");
  j["valid"] = false;
  CHECK_FALSE(key_of(j.dump(), VerdictKind::rt));

  Json missing = Json::parse(kValidRt);
  missing.erase("feedback");
  CHECK(key_of(missing.dump(), VerdictKind::rt) == "feedback");
  Json extra = Json::parse(kValidRt);
  extra["score"] = 3;
  CHECK(key_of(extra.dump(), VerdictKind::rt) == "score");
  Json wrong = Json::parse(kValidRt);
  wrong["categories"]["logical_soundness"] = "yes";
  CHECK(key_of(wrong.dump(), VerdictKind::rt) == "categories.logical_soundness");
  Json renamed = Json::parse(kValidRt);
  renamed["categories"].erase("formatting_and_focus");
  CHECK(key_of(renamed.dump(), VerdictKind::rt) == "categories.formatting_and_focus");
  CHECK(key_of("nothing", VerdictKind::rt) == "<none>");
}

TEST_CASE("turn verdict parsing enforces the conjunction") {
  for (bool a : {false, true})
    for (bool b : {false, true}) {
      const auto v = parse_turn_verdict(turn_json(a, b));
      CHECK(v.valid == (a && b));
    }
  Json j = Json::parse(turn_json(true, false));
  j["valid"] = true;
  CHECK(key_of(j.dump(), VerdictKind::turn) == "valid");
  Json old = Json::parse(turn_json(true, true));
  old["criteria"] = old["criteria_scores"];
  old.erase("criteria_scores");
  CHECK(key_of(old.dump(), VerdictKind::turn) == "criteria");
}

TEST_CASE("judge prompts") {
  const auto s = sample();
  const auto r = rt();
  const auto c = conversation();
  const std::string rt_prompt = build_judge_rt_prompt(s, r);
  CHECK(rt_prompt.find("{{") == std::string::npos);
  CHECK(rt_prompt.find("Step A.1: calculate_average should return") != std::string::npos);

  const std::string turn_prompt = build_judge_turn_prompt(s, r, c, 6);
  CHECK(turn_prompt.find("{{") == std::string::npos);
  CHECK(turn_prompt.find("Step A.3: For calculate_average(1, 3)") != std::string::npos);
  CHECK(turn_prompt.find("what does 1 + 3 / 2 work out to?") != std::string::npos);
  CHECK(turn_prompt.find("[A.3]") == std::string::npos);
  CHECK(turn_prompt.find("3 / 2 is 1.5, plus 1 is 2.5.") != std::string::npos);

  CHECK_THROWS_AS(build_judge_turn_prompt(s, r, c, 0), PreconditionError);
  CHECK_THROWS_AS(build_judge_turn_prompt(s, r, c, 3), PreconditionError);
  CHECK_THROWS_AS(build_judge_turn_prompt(s, r, c, 9), PreconditionError);
}

TEST_CASE("judging a conversation and its validity") {
  const auto s = sample();
  std::mutex mu;
  std::vector<std::string> tags;
  auto mock = std::make_shared<MockTransport>([&](const GenerationRequest& r, int attempt) -> std::string {
    {
      std::lock_guard lock(mu);
      tags.push_back(r.tag);
    }
    if (r.tag.find("/A.2") != std::string::npos) return attempt == 0 ? "not json" : turn_json(true, true);
    if (r.tag.find("/A.4") != std::string::npos) return turn_json(true, false);
    return turn_json(true, true);
  });
  Gateway g(mock);
  const auto verdicts = judge_conversation(g, s, rt(), conversation(), "judge-claude-sonnet-4-5", 3);
  REQUIRE(verdicts.size() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(verdicts[k].step == k + 1);
    CHECK(verdicts[k].turn_index == 2 * k + 2);
    CHECK(verdicts[k].meta.judge_config_id == "judge-claude-sonnet-4-5");
    CHECK(verdicts[k].meta.config_id == "gpt-5-low");
    CHECK(validate_verdict(verdicts[k]).empty());
  }
  CHECK(verdicts[1].meta.attempts == 2);
  CHECK_FALSE(verdicts[3].valid);
  CHECK(item_id(verdicts[3]) == "turn:gpt-5-low:calculate_average:A.4");
  CHECK(std::count(tags.begin(), tags.end(), "judge-turn/gpt-5-low/calculate_average/A.2") == 2);

  const auto cv = conversation_validity(verdicts);
  CHECK(cv == ConversationValidity{false, 3, 4});
  std::vector<TurnVerdict> all_good(verdicts.begin(), verdicts.begin() + 3);
  CHECK(conversation_validity(all_good).conversation_valid);
  CHECK_THROWS_AS(conversation_validity({}), PreconditionError);
}

TEST_CASE("persistent malformed output becomes an error verdict") {
  auto mock = std::make_shared<MockTransport>([](const GenerationRequest&, int) { return "I think it is fine."; });
  Gateway g(mock);
  const auto verdicts = judge_conversation(g, sample(), rt(), conversation(), "judge-claude-sonnet-4-5", 2);
  REQUIRE(verdicts.size() == 4);
  for (const auto& v : verdicts) {
    CHECK_FALSE(v.valid);
    REQUIRE(v.meta.error);
    CHECK(v.meta.error->rfind("after one re-prompt: ", 0) == 0);
  }
  CHECK(mock->calls() == 8);
  CHECK_FALSE(conversation_validity(verdicts).conversation_valid);

  CHECK_THROWS_AS(judge_rt(g, sample(), rt(), "judge-claude-sonnet-4-5"), VerdictParseError);
}

TEST_CASE("rt judgement") {
  auto mock = std::make_shared<MockTransport>([](const GenerationRequest& r, int) {
    CHECK(r.tag == "judge-rt/gpt-5-low/calculate_average");
    return std::string(kValidRt);
  });
  Gateway g(mock);
  const auto v = judge_rt(g, sample(), rt(), "judge-claude-sonnet-4-5");
  CHECK(v.valid);
  CHECK(v.meta.prompt_version == judge_rt_prompt_version());
  CHECK(item_id(v) == "rt:gpt-5-low:calculate_average");
}

TEST_CASE("verdict JSONL round trip") {
  VerdictSet set;
  RtVerdict rv = parse_rt_verdict(kValidRt);
  rv.meta = {"calculate_average", "gpt-5-low", "judge-claude-sonnet-4-5", judge_rt_prompt_version(), 1, std::nullopt};
  set.rt.push_back(rv);
  RtVerdict failed;
  failed.meta = {"top_k", "gpt-5-low", "judge-claude-sonnet-4-5", judge_rt_prompt_version(), 2, "after one re-prompt"};
  set.rt.push_back(failed);
  TurnVerdict tv = parse_turn_verdict(turn_json(true, false));
  tv.meta = {"calculate_average", "gpt-5-low", "judge-claude-sonnet-4-5", judge_turn_prompt_version(), 1,
             std::nullopt};
  tv.turn_index = 4;
  tv.step = 2;
  set.turns.push_back(tv);

  TempDir dir;
  save_verdicts(set, dir / "v.jsonl");
  const auto back = verdicts_from_jsonl(dir / "v.jsonl");
  CHECK(back.rt == set.rt);
  CHECK(back.turns == set.turns);
  CHECK(to_json(tv)["step"] == "A.2");
  CHECK(to_json(tv)["kind"] == "turn");

  Json bad = to_json(tv);
  bad["valid"] = true;
  write_text(dir / "bad.jsonl", to_json(rv).dump() + "\n" + bad.dump() + "\n");
  try {
    verdicts_from_jsonl(dir / "bad.jsonl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.field() == "valid");
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}
