#pragma once

#include <random>
#include <set>
#include <string>
#include <vector>

#include "socdbg/trajectory.hpp"

namespace socdbg::testing {

/// A valid trajectory of 2 to 9 steps with random text and backward citations.
inline std::vector<RtStep> random_steps(std::mt19937& rng) {
  static const std::vector<std::string> words = {"x",     "returns", "the",  "loop", "index", "value", "+",  "/",
                                                 "2.5",   "list",    "when", "is",   "called", "[1, 2]", "y", "k"};
  const int n = std::uniform_int_distribution<int>(2, 9)(rng);
  std::vector<RtStep> steps;
  for (int k = 1; k <= n; ++k) {
    RtStep s;
    s.number = k;
    const int len = std::uniform_int_distribution<int>(1, 12)(rng);
    for (int w = 0; w < len; ++w) {
      if (w) s.text += std::uniform_int_distribution<int>(0, 9)(rng) == 0 ? "\n" : " ";
      s.text += words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
    }
    if (k > 1 && std::uniform_int_distribution<int>(0, 1)(rng)) {
      std::set<int> cited;
      const int c = std::uniform_int_distribution<int>(1, k - 1)(rng);
      for (int i = 0; i < c; ++i) cited.insert(std::uniform_int_distribution<int>(1, k - 1)(rng));
      std::string group;
      for (int j : cited) group += (group.empty() ? "" : ", ") + std::string("A.") + std::to_string(j);
      s.text += " (" + group + ")";
      s.cited = cited;
    }
    steps.push_back(std::move(s));
  }
  return steps;
}

}  // namespace socdbg::testing
