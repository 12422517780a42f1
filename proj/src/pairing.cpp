#include "socdbg/pairing.hpp"

#include <algorithm>
#include <iterator>

#include "socdbg/jsonl.hpp"

namespace socdbg {

SolutionProfile profile_solution(const SolutionRecord& solution, const ConstructRegistry& registry) {
  SolutionProfile p;
  p.id = solution.id;
  auto extracted = registry.extract(solution.source);
  p.constructs = std::move(extracted.constructs);
  p.parse_failed = extracted.parse_failed;
  for (const auto& pattern : registry.patterns()) {
    if (registry.matches(solution.source, pattern.id)) p.patterns.insert(pattern.id);
  }
  return p;
}

std::vector<SolutionProfile> profile_solutions(std::span<const SolutionRecord> solutions,
                                               const ConstructRegistry& registry) {
  std::vector<SolutionProfile> out;
  out.reserve(solutions.size());
  for (const auto& s : solutions) out.push_back(profile_solution(s, registry));
  return out;
}

int overlap_score(const std::set<std::string>& a, const std::set<std::string>& b) {
  int n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

PairingResult pair(std::span<const Misconception> misconceptions,
                   std::span<const SolutionProfile> solutions, std::size_t target_count) {
  PairingResult result;
  if (target_count == 0) return result;
  if (misconceptions.empty() || solutions.empty()) {
    result.exhausted = true;
    return result;
  }

  std::vector<bool> used(solutions.size(), false);
  std::size_t idle_visits = 0;
  for (std::size_t visit = 0; result.pairings.size() < target_count; ++visit) {
    // A whole cycle without a pairing means no later cycle can add one either.
    if (idle_visits == misconceptions.size()) {
      result.exhausted = true;
      break;
    }
    const Misconception& m = misconceptions[visit % misconceptions.size()];
    SelectionStep step;
    step.visit = visit;
    step.misconception_id = m.id;

    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < solutions.size(); ++k) {
      if (used[k]) continue;
      const auto& s = solutions[k];
      const int score = overlap_score(m.related_constructs, s.constructs);
      const bool special = m.special_case_id && s.patterns.contains(*m.special_case_id);
      if (score < 1 && !special) continue;
      step.candidates.push_back({s.id, k, score, special});
      // Strict comparison keeps the lowest ordinal among equal scores.
      if (!best || score > step.candidates[*best].score) best = step.candidates.size() - 1;
    }

    if (best) {
      const Candidate& c = step.candidates[*best];
      used[c.ordinal] = true;
      step.chosen = c.solution_id;
      Pairing p;
      p.misconception_id = m.id;
      p.solution_id = c.solution_id;
      p.overlap_score = c.score;
      std::set_intersection(m.related_constructs.begin(), m.related_constructs.end(),
                            solutions[c.ordinal].constructs.begin(), solutions[c.ordinal].constructs.end(),
                            std::inserter(p.matched_constructs, p.matched_constructs.end()));
      p.matched_by_special_case = c.special_case;
      result.pairings.push_back(std::move(p));
      idle_visits = 0;
    } else {
      ++idle_visits;
    }
    result.trace.push_back(std::move(step));
  }
  return result;
}

std::vector<PairingCount> pairing_report(std::span<const Misconception> misconceptions,
                                         std::span<const Pairing> pairings) {
  std::vector<PairingCount> out;
  for (const auto& m : misconceptions) out.push_back({m.id, 0});
  for (const auto& p : pairings) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const PairingCount& c) { return c.misconception_id == p.misconception_id; });
    if (it == out.end()) {
      out.push_back({p.misconception_id, 1});
    } else {
      ++it->count;
    }
  }
  return out;
}

Json to_json(const Pairing& p) {
  return Json{{"misconception_id", p.misconception_id},
              {"solution_id", p.solution_id},
              {"overlap_score", p.overlap_score},
              {"matched_constructs", p.matched_constructs},
              {"matched_by_special_case", p.matched_by_special_case}};
}

Pairing pairing_from_json(const Json& j) {
  jsonl::ObjectReader r(j);
  Pairing p;
  p.misconception_id = r.str("misconception_id");
  p.solution_id = r.str("solution_id");
  const long long score = r.integer("overlap_score");
  for (auto& c : r.str_list("matched_constructs")) p.matched_constructs.insert(std::move(c));
  p.matched_by_special_case = r.boolean("matched_by_special_case");
  r.finish();
  if (score < 0) throw DataError("overlap_score", "must be non-negative");
  if (static_cast<std::size_t>(score) != p.matched_constructs.size()) {
    throw DataError("overlap_score", "must equal the number of matched constructs");
  }
  if (score == 0 && !p.matched_by_special_case) {
    throw DataError("overlap_score", "zero overlap requires a special-case match");
  }
  p.overlap_score = static_cast<int>(score);
  return p;
}

Json to_json(const SelectionStep& s) {
  Json candidates = Json::array();
  for (const auto& c : s.candidates) {
    candidates.push_back(Json{{"solution_id", c.solution_id},
                              {"ordinal", c.ordinal},
                              {"score", c.score},
                              {"special_case", c.special_case}});
  }
  Json j{{"visit", s.visit}, {"misconception_id", s.misconception_id}, {"candidates", std::move(candidates)}};
  j["chosen"] = s.chosen ? Json(*s.chosen) : Json(nullptr);
  return j;
}

Json to_json(const SolutionProfile& s) {
  return Json{{"id", s.id}, {"constructs", s.constructs}, {"patterns", s.patterns}, {"parse_failed", s.parse_failed}};
}

}  // namespace socdbg
