#pragma once

// Hand-built ConfigResults with known counts, for checking aggregation
// against figures computed by hand or by recount.py.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "socdbg/metrics.hpp"

namespace socdbg::testing {

struct SyntheticSample {
  int steps = 3;
  bool rt_failed = false;
  bool rt_valid = true;
  bool conversation_failed = false;
  int invalid_turns = 0;  // the first k aligned turns are judged invalid
};

inline ConfigResults synthetic_results(const std::string& config, const std::vector<SyntheticSample>& plan,
                                       bool reasoning = true) {
  ConfigResults r;
  r.config_id = config;
  r.reasoning = reasoning;
  const GenerationMeta meta{config, "v", 1, std::nullopt};
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& p = plan[i];
    const std::string id = "s" + std::to_string(i + 1);
    r.sample_ids.push_back(id);

    ReasoningTrajectory rt{id, {}, meta, std::nullopt};
    if (p.rt_failed) {
      rt.error = "after one re-prompt: gap in step labels";
    } else {
      for (int k = 1; k <= p.steps; ++k) rt.steps.push_back({k, "step " + std::to_string(k), {}});
      RtVerdict v;
      v.meta = {id, config, "judge", "jv", 1, std::nullopt};
      v.valid = p.rt_valid;
      v.categories = {true, p.rt_valid, true};
      r.rt_verdicts.push_back(v);
    }
    r.trajectories.push_back(rt);

    Conversation c{id, {}, meta, std::nullopt};
    if (p.rt_failed || p.conversation_failed) {
      c.error = p.rt_failed ? "skipped: trajectory generation failed" : "provider failed";
    } else {
      c.turns.push_back({Speaker::teacher, "open", std::nullopt});
      c.turns.push_back({Speaker::student, "reply", std::nullopt});
      for (int k = 1; k <= p.steps; ++k) {
        c.turns.push_back({Speaker::teacher, "q", k});
        c.turns.push_back({Speaker::student, "a", k});
        TurnVerdict v;
        v.meta = {id, config, "judge", "jt", 1, std::nullopt};
        v.turn_index = 2 * k;
        v.step = k;
        v.valid = k > p.invalid_turns;
        v.criteria = {true, v.valid};
        r.turn_verdicts.push_back(v);
      }
    }
    r.conversations.push_back(c);
  }
  return r;
}

// 227 samples shaped like the GPT-5 low-effort row: 1,488 steps, 206 valid
// RTs, 224 fully grounded conversations and 9 ungrounded turns.
inline std::vector<SyntheticSample> gpt5_low_plan() {
  std::vector<SyntheticSample> plan(227);
  for (std::size_t i = 0; i < plan.size(); ++i) plan[i].steps = i < 126 ? 7 : 6;
  for (std::size_t i = 0; i < 21; ++i) plan[i * 10].rt_valid = false;
  for (std::size_t i : {5u, 50u, 200u}) plan[i].invalid_turns = 3;
  return plan;
}

}  // namespace socdbg::testing
