// Acceptance gate: one [PASS]/[FAIL] line per criterion. Runs offline against
// the fixtures, the replay cassette and the sandbox test double.

#include <chrono>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "pairing_oracle.hpp"
#include "published_configs.hpp"
#include "random_rt.hpp"
#include "socdbg/cli.hpp"
#include "socdbg/conversation.hpp"
#include "socdbg/execution.hpp"
#include "socdbg/jsonl.hpp"
#include "socdbg/judge.hpp"
#include "socdbg/metrics.hpp"
#include "socdbg/pairing.hpp"
#include "synthetic_results.hpp"
#include "test_support.hpp"

using namespace socdbg;
using namespace socdbg::testing;

namespace {

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  template <class A, class B>
  void equal(const A& actual, const B& expected, const std::string& what) {
    if (!(actual == expected)) {
      std::ostringstream s;
      s << what << " (got " << actual << ", want " << expected << ")";
      failures_.push_back(s.str());
    }
  }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> failures_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string pairs_jsonl(const std::vector<Pairing>& pairs) {
  std::vector<Json> records;
  for (const auto& p : pairs) records.push_back(to_json(p));
  return jsonl::dump(records);
}

DebugSample worked(const std::string& id) {
  for (auto& s : load_dataset(fixture_path("samples/worked.jsonl")))
    if (s.id == id) return s;
  throw std::runtime_error("no worked sample " + id);
}

SandboxOptions stub_sandbox() {
  SandboxOptions o;
  o.runner = std::filesystem::path(SOCDBG_SUPPORT) / "sandbox_stub.py";
  o.python = SOCDBG_PYTHON;
  return o;
}

template <class E, class F>
std::optional<E> thrown(F&& f) {
  try {
    f();
  } catch (const E& e) {
    return e;
  }
  return std::nullopt;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "socdbg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

Json recount(const std::string& args) {
  const auto r = run_capture(std::string(SOCDBG_PYTHON) + " " + quote(std::string(SOCDBG_SUPPORT) + "/recount.py") +
                             " " + args);
  if (r.status != 0) throw std::runtime_error("recount.py failed: " + args);
  return Json::parse(r.output);
}

// --- criteria ---

void pairing_oracle(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ms = load_misconceptions(fixture_path("pairing/misconceptions.jsonl"));
  const auto ss = profile_solutions(load_solutions(fixture_path("pairing/solutions.jsonl")));
  c.equal(ms.size(), 5u, "desk misconceptions");
  c.equal(ss.size(), 20u, "desk solutions");
  const auto first = pairs_jsonl(pair(ms, ss, 10).pairings);
  const auto second = pairs_jsonl(pair(ms, ss, 10).pairings);
  const double elapsed = seconds_since(t0);
  c.equal(pair(ms, ss, 10).pairings.size(), 10u, "pair count");
  c.expect(first == pairs_jsonl(oracle_pair(ms, ss, 10)), "engine output differs from the oracle");
  c.expect(first == second, "repeated runs differ");
  c.expect(first == read_text(fixture_path("pairing/expected_pairs.jsonl")), "output differs from the frozen pairs");
  c.expect(elapsed < 1.0, "took " + std::to_string(elapsed) + " s");
}

void overlap_property(Check& c) {
  std::mt19937 rng(1000);
  const auto vocabulary = construct_vocabulary();
  std::uniform_int_distribution<std::size_t> pick(0, vocabulary.size() - 1);
  std::uniform_int_distribution<int> size(0, 12);
  for (int round = 0; round < 1000; ++round) {
    std::set<std::string> a, b;
    for (int k = size(rng); k > 0; --k) a.insert(vocabulary[pick(rng)]);
    for (int k = size(rng); k > 0; --k) b.insert(vocabulary[pick(rng)]);
    int brute = 0;
    for (const auto& x : a)
      for (const auto& y : b) brute += x == y;
    if (overlap_score(a, b) != brute) {
      c.equal(overlap_score(a, b), brute, "round " + std::to_string(round));
      return;
    }
  }
}

void execution_fixtures(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto avg = worked("calculate_average");
  const auto r1 = run_tests(avg.buggy_source, avg.unit_tests, stub_sandbox());
  const auto f1 = select_simplest_failure(r1, avg.unit_tests);
  c.expect(f1.outcome.status == TestStatus::logical, "calculate_average is not a logical failure");
  c.expect(f1.outcome.actual == "2.5", "calculate_average actual is not 2.5");
  c.expect(f1.test.expected_value == "2.0", "calculate_average expected is not 2.0");

  const auto topk = worked("top_k");
  const auto r2 = run_tests(topk.buggy_source, topk.unit_tests, stub_sandbox());
  const auto f2 = select_simplest_failure(r2, topk.unit_tests);
  c.expect(f2.outcome.status == TestStatus::runtime, "top_k is not a runtime failure");
  c.expect(f2.outcome.error_type == "IndexError", "top_k error is not IndexError");
  c.expect(f2.outcome.line == 5, "top_k error is not on line 5");

  const auto pal = worked("is_palindrome");
  const auto r3 = run_tests(pal.buggy_source, pal.unit_tests, stub_sandbox());
  c.expect(!r3.outcomes.empty(), "is_palindrome has no outcomes");
  for (const auto& o : r3.outcomes) {
    c.expect(o.status == TestStatus::syntax, "is_palindrome test " + std::to_string(o.ordinal) + " is not syntax");
    c.expect(o.line == 5, "is_palindrome test " + std::to_string(o.ordinal) + " is not on line 5");
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < 5.0, "took " + std::to_string(elapsed) + " s");
}

void convention_rendering(Check& c) {
  const std::pair<const char*, const char*> cases[] = {
      {"calculate_average",
       "When called as calculate_average(1, 3), the function returns 2.5; whereas the expected result is 2.0."},
      {"top_k", "When called as top_k([1, 2, 3, 4, 5], 1), the function raises IndexError on line 5."},
      {"is_palindrome", "When called as is_palindrome(\"racecar\"), the function produces a SyntaxError on line 5."},
  };
  for (const auto& [id, sentence] : cases) {
    const auto s = worked(id);
    const auto report = run_tests(s.buggy_source, s.unit_tests, stub_sandbox());
    const auto described = describe_selected(select_simplest_failure(report, s.unit_tests));
    c.equal(render_convention(described), std::string(sentence), id);
    c.expect(described.sentence == sentence, std::string(id) + ": stored sentence differs");
  }
}

void config_table(Check& c) {
  const auto& reg = ModelRegistry::builtin();
  c.equal(reg.configs().size(), 14u, "registered configurations");
  for (std::size_t i = 0; i < std::min<std::size_t>(14, reg.configs().size()); ++i) {
    const Row& r = kPublishedConfigs[i];
    c.expect(resolve_config(r.model, flags_for(r)) == expected(r), std::string(r.id) + ": resolve_config differs");
    c.expect(reg.configs()[i] == expected(r), std::string(r.id) + ": registry entry differs");
  }
  ReasoningFlags judge_flags;
  judge_flags.profile = "judge";
  const ModelConfig judge = resolve_config("claude-sonnet-4-5", judge_flags);
  c.expect(judge == reg.default_for("judge"), "judge profile differs from the registry default");
  c.expect(judge.temperature == 1.0, "judge temperature is not 1.0");
  c.equal(judge.max_output_tokens, 8000, "judge max tokens");
  c.expect(judge.reasoning_enabled, "judge thinking is off");
}

void rt_grammar(Check& c) {
  std::mt19937 rng(20251016);
  for (int round = 0; round < 50; ++round) {
    const auto steps = random_steps(rng);
    if (parse_rt(render_rt(steps)) != steps) {
      c.expect(false, "round trip failed:\n" + render_rt(steps));
      return;
    }
  }
  const auto gap = thrown<RtParseError>([] { parse_rt("Step A.1: a\nStep A.2: b\nStep A.4: d"); });
  c.expect(gap && gap->label() == "A.3", "a gap does not name A.3");
  const auto order = thrown<RtParseError>([] { parse_rt("Step A.1: a\nStep A.3: c\nStep A.2: b"); });
  c.expect(order && order->label().has_value(), "an out-of-order step is not named");
  const auto start = thrown<RtParseError>([] { parse_rt("Step A.2: a\nStep A.3: b"); });
  c.expect(start && start->label() == "A.1", "a missing A.1 is not named");
  const auto forward = thrown<RtParseError>([] { parse_rt("Step A.1: a (A.2)\nStep A.2: b"); });
  c.expect(forward && forward->label() == "A.1", "a forward citation is not named");
}

void conversation_grammar(Check& c) {
  const auto good = parse_conversation(fixture("conversations/precedence_sc.txt"), 4);
  c.expect(validate_conversation(good, 4).empty(), "the annotated fixture does not validate");
  c.expect(aligned_teacher_turns(good) == std::vector<std::size_t>{2, 4, 6, 8}, "alignment of the annotated fixture");

  const auto first = thrown<ConversationParseError>(
      [] { parse_conversation(fixture("conversations/student_first.txt"), 1); });
  c.expect(first && std::string(first->what()) == "conversation must begin with a Teacher turn",
           "Student-first diagnostic");
  const auto doubled = thrown<ConversationParseError>(
      [] { parse_conversation(fixture("conversations/consecutive_teacher.txt"), 2); });
  c.expect(doubled && std::string(doubled->what()) == "two consecutive Teacher turns (turn 3 and turn 4)",
           "double-Teacher diagnostic");
  const auto missing = thrown<ConversationParseError>(
      [] { parse_conversation(fixture("conversations/unaligned_step.txt"), 4); });
  c.expect(missing && std::string(missing->what()) == "no Teacher turn is aligned to A.3" && missing->label() == "A.3",
           "missing-step diagnostic");
}

std::pair<std::vector<Label>, std::vector<Label>> label_sets(int n, int matches) {
  std::vector<Label> judge, human;
  for (int i = 0; i < n; ++i) {
    const std::string id = "rt:cfg:s" + std::to_string(i);
    judge.push_back({id, true});
    human.push_back({id, i < matches});
  }
  return {judge, human};
}

void verdict_math(Check& c) {
  const auto rt_mismatch = thrown<VerdictParseError>([] {
    parse_rt_verdict(R"({"valid": true, "categories": {"logical_soundness": true,
      "step_construction_and_precision": false, "formatting_and_focus": true}, "comments": "", "feedback": "x"})");
  });
  c.expect(rt_mismatch && rt_mismatch->key() == "valid", "RT verdict conjunction not enforced");
  const auto turn_mismatch = thrown<VerdictParseError>([] {
    parse_turn_verdict(R"({"valid": false, "criteria_scores": {"prompts_correct_inference": true,
      "does_not_state_inference": true}, "comments": "", "feedback": "NONE"})");
  });
  c.expect(turn_mismatch && turn_mismatch->key() == "valid", "turn verdict conjunction not enforced");

  const auto r = synthetic_results("cfg", {{3, false, true, false, 0}, {3, false, true, false, 1}, {3}});
  int valid_convs = 0, grounded = 0, total = 0;
  for (const auto& id : r.sample_ids) {
    std::vector<TurnVerdict> turns;
    for (const auto& v : r.turn_verdicts)
      if (v.meta.sample_id == id) turns.push_back(v);
    const auto cv = conversation_validity(turns);
    valid_convs += cv.conversation_valid;
    grounded += cv.grounded;
    total += cv.total;
  }
  c.equal(valid_convs, 2, "valid conversations");
  c.equal(grounded, 8, "grounded turns");
  c.equal(total, 9, "aligned turns");
  const auto row = aggregate(r);
  c.equal(format_percent(row.pct_valid_convs), std::string("66.7"), "pct valid conversations");
  c.equal(format_percent(row.pct_grounded_turns), std::string("88.9"), "pct grounded turns");

  const auto [j30, h30] = label_sets(30, 23);
  c.equal(format_percent(agreement(j30, h30).rate), std::string("76.7"), "RT agreement 23/30");
  const auto [j88, h88] = label_sets(88, 85);
  c.equal(format_percent(agreement(j88, h88).rate), std::string("96.6"), "turn agreement 85/88");
}

void end_to_end(Check& c) {
  TempDir dir;
  const std::string corpus = fixture_path("benchmark/corpus.jsonl").string();
  const std::string cassette = fixture_path("benchmark/cassette.jsonl").string();
  const std::vector<std::string> configs = {"gpt-5-low", "claude-sonnet-4-5"};

  // Stage by stage, one directory per configuration.
  std::string ids;
  for (const auto& s : load_dataset(corpus)) ids += (ids.empty() ? "" : ",") + s.id;
  Json staged = Json::array();
  for (const auto& config : configs) {
    const auto d = dir / "stages" / config;
    std::filesystem::create_directories(d);
    const auto p = [&](const char* name) { return (d / name).string(); };
    const bool ok =
        cli({"--replay", cassette, "gen-rt", "--samples", corpus, "--model", config, "--out",
             p("trajectories.jsonl")}) == 0 &&
        cli({"--replay", cassette, "gen-conversation", "--samples", corpus, "--trajectories", p("trajectories.jsonl"),
             "--out", p("conversations.jsonl")}) == 0 &&
        cli({"--replay", cassette, "judge", "--samples", corpus, "--trajectories", p("trajectories.jsonl"),
             "--conversations", p("conversations.jsonl"), "--out", p("verdicts.jsonl")}) == 0;
    c.expect(ok, config + ": a stage command failed");
    if (!ok) return;
    const bool reasoning = ModelRegistry::builtin().find(config).reasoning_enabled;
    staged.push_back(recount("--dir " + quote(d.string()) + " --config " + config + " --samples " + quote(ids) +
                             (reasoning ? " --reasoning" : ""))
                         .at("rows")
                         .at(0));
  }

  const auto report_path = dir / "report.json";
  const auto manifest_path = dir / "manifest.json";
  const bool ran = cli({"--replay", cassette, "benchmark", "--corpus", corpus, "--configs", "gpt-5-low,claude-sonnet-4-5",
                        "--out", report_path.string(), "--manifest", manifest_path.string()}) == 0;
  c.expect(ran, "benchmark failed");
  if (!ran) return;
  const Json report = Json::parse(read_text(report_path));
  const Json rows = report.at("rows");
  c.equal(rows.size(), 2u, "report rows");
  c.expect(rows == recount("--manifest " + quote(manifest_path.string())).at("rows"),
           "report differs from the recount of its manifest");
  c.expect(rows == staged, "report differs from the recount of the stage outputs");
  const Json manifest = Json::parse(read_text(manifest_path));
  c.equal(manifest.at("generations").size(), 10u, "manifest generations");
  for (const char* key : {"pct_valid_rts", "pct_valid_convs", "pct_grounded_turns"})
    for (const auto& row : rows) {
      const double v = row.at(key).get<double>();
      c.expect(v >= 0 && v <= 100, std::string(key) + " out of range");
    }
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void(Check&)>> criteria[] = {
      {"pairing: output is byte-identical to the brute-force oracle, repeatable, under 1 s", pairing_oracle},
      {"pairing: overlap score equals the brute-force intersection size on 1000 random pairs", overlap_property},
      {"execution: worked programs classify as logical 2.5/2.0, IndexError line 5, SyntaxError line 5 on every test",
       execution_fixtures},
      {"execution: the three failed-test templates render byte-exact", convention_rendering},
      {"gateway: resolve_config reproduces all 14 configurations and the judge profile", config_table},
      {"trajectory: parse/render identity on 50 random trajectories; violations name the label", rt_grammar},
      {"conversation: Teacher-first, alternation and alignment enforced with the stated diagnostics",
       conversation_grammar},
      {"judging: conjunctions enforced; 66.7 / 88.9 synthetic counts; agreement 76.7 and 96.6", verdict_math},
      {"end to end: replay corpus through gen-rt, gen-conversation, judge, benchmark matches the recount", end_to_end},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Check c;
    try {
      run(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("threw: ") + e.what());
    }
    if (c.failures().empty()) {
      std::cout << "[PASS] " << name << "\n";
    } else {
      ++failed;
      std::cout << "[FAIL] " << name << "\n";
      for (const auto& f : c.failures()) std::cout << "       " << f << "\n";
    }
  }
  std::cout << (std::size(criteria) - failed) << "/" << std::size(criteria) << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
