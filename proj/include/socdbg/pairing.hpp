#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "socdbg/constructs.hpp"
#include "socdbg/model.hpp"

namespace socdbg {

/// What the pairing loop needs to know about one solution: its constructs and
/// which special-case patterns its source satisfies.
struct SolutionProfile {
  std::string id;
  std::set<std::string> constructs;
  std::set<std::string> patterns;
  bool parse_failed = false;

  bool operator==(const SolutionProfile&) const = default;
};

SolutionProfile profile_solution(const SolutionRecord& solution,
                                 const ConstructRegistry& registry = ConstructRegistry::builtin());
std::vector<SolutionProfile> profile_solutions(std::span<const SolutionRecord> solutions,
                                               const ConstructRegistry& registry = ConstructRegistry::builtin());

struct Pairing {
  std::string misconception_id;
  std::string solution_id;
  int overlap_score = 0;
  std::set<std::string> matched_constructs;
  // The solution satisfies the misconception's special-case pattern. Recorded
  // whether or not the overlap alone would have made it eligible.
  bool matched_by_special_case = false;

  bool operator==(const Pairing&) const = default;
};

struct Candidate {
  std::string solution_id;
  std::size_t ordinal = 0;
  int score = 0;
  bool special_case = false;

  bool operator==(const Candidate&) const = default;
};

/// One round-robin visit. `candidates` are every eligible unused solution at
/// that moment, in input order.
struct SelectionStep {
  std::size_t visit = 0;
  std::string misconception_id;
  std::vector<Candidate> candidates;
  std::optional<std::string> chosen;

  bool operator==(const SelectionStep&) const = default;
};

struct PairingResult {
  std::vector<Pairing> pairings;
  std::vector<SelectionStep> trace;
  // Fewer than the requested count because a full cycle added nothing.
  bool exhausted = false;

  bool operator==(const PairingResult&) const = default;
};

int overlap_score(const std::set<std::string>& a, const std::set<std::string>& b);

PairingResult pair(std::span<const Misconception> misconceptions,
                   std::span<const SolutionProfile> solutions, std::size_t target_count);

struct PairingCount {
  std::string misconception_id;
  int count = 0;

  bool operator==(const PairingCount&) const = default;
};

/// Per-misconception counts in misconception order, zeros included.
std::vector<PairingCount> pairing_report(std::span<const Misconception> misconceptions,
                                         std::span<const Pairing> pairings);

Json to_json(const Pairing& p);
Pairing pairing_from_json(const Json& j);
Json to_json(const SelectionStep& s);
Json to_json(const SolutionProfile& s);

}  // namespace socdbg
