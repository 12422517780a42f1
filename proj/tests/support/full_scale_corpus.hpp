#pragma once

// Synthetic stand-in for the 40-misconception / 558-solution pairing corpus.
// Common misconceptions reference constructs that most solutions contain; each
// rare one references a construct found in only 2-4 solutions (cycling 2, 3, 4,
// so the rare pools hold 83 solutions in total).

#include <random>
#include <string>
#include <vector>

#include "socdbg/model.hpp"
#include "socdbg/pairing.hpp"

namespace socdbg::testing {

struct FullScaleCorpus {
  std::vector<Misconception> misconceptions;
  std::vector<SolutionProfile> solutions;
  std::vector<std::string> common_ids;
  std::vector<std::string> rare_ids;
  int rare_pool_total = 0;
};

inline FullScaleCorpus full_scale_corpus(unsigned seed = 2025) {
  static const std::vector<std::string> common = {
      "for loop",       "while loop",   "range function", "indexing",    "if statement",
      "list.append",    "len function", "operator +",     "operator ==", "augmented assignment",
      "return in loop", "else clause"};
  static const std::vector<std::string> rare = {
      "method chaining",   "walrus operator", "nonlocal statement",        "for else",
      "while else",        "set.discard",     "dict.setdefault",           "str.swapcase",
      "list.insert",       "list.reverse",    "global statement",          "yield",
      "decorator",         "inheritance",     "class __init__",            "lambda",
      "zip function",      "enumerate function", "try finally",            "with statement",
      "star unpacking",    "mutable default parameter", "del statement", "assert statement",
      "set comprehension", "dict comprehension", "chained comparison",     "reversed function"};

  std::mt19937 rng(seed);
  // Plain modulo keeps the draw identical across standard libraries.
  auto draw = [&](unsigned n) { return static_cast<unsigned>(rng() % n); };

  FullScaleCorpus c;
  for (std::size_t k = 0; k < common.size(); ++k) {
    Misconception m;
    m.id = "common_" + std::to_string(k);
    m.description = "belief about " + common[k];
    m.related_constructs = {common[k], common[(k + 1) % common.size()]};
    c.misconceptions.push_back(m);
    c.common_ids.push_back(m.id);
  }
  std::vector<int> pool;
  for (std::size_t k = 0; k < rare.size(); ++k) {
    Misconception m;
    m.id = "rare_" + std::to_string(k);
    m.description = "belief about " + rare[k];
    m.related_constructs = {rare[k]};
    c.misconceptions.push_back(m);
    c.rare_ids.push_back(m.id);
    pool.push_back(2 + static_cast<int>(k % 3));
    c.rare_pool_total += pool.back();
  }

  int next = 0;
  auto add_solution = [&](std::set<std::string> constructs) {
    SolutionProfile s;
    s.id = "sol_" + std::to_string(next++);
    s.constructs = std::move(constructs);
    s.constructs.insert("function definition");
    s.constructs.insert("return statement");
    c.solutions.push_back(std::move(s));
  };
  for (std::size_t k = 0; k < rare.size(); ++k) {
    for (int j = 0; j < pool[k]; ++j) add_solution({rare[k]});
  }
  while (c.solutions.size() < 558) {
    std::set<std::string> cs;
    const unsigned n = 2 + draw(3);
    while (cs.size() < n) cs.insert(common[draw(static_cast<unsigned>(common.size()))]);
    add_solution(std::move(cs));
  }

  auto shuffle = [&](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw(static_cast<unsigned>(i))]);
  };
  shuffle(c.misconceptions);
  shuffle(c.solutions);
  return c;
}

}  // namespace socdbg::testing
