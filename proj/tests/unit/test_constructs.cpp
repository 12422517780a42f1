#include <algorithm>
#include <filesystem>

#include "doctest.h"
#include "socdbg/constructs.hpp"
#include "socdbg/python/ast.hpp"
#include "test_support.hpp"

using namespace socdbg;

namespace {

bool has(const ConstructSet& s, const std::string& name) { return s.constructs.contains(name); }

Json labels() { return Json::parse(testing::fixture("constructs/labels.json")); }

std::vector<std::string> corpus_files() {
  std::vector<std::string> out;
  const Json all = labels();
  for (const auto& [name, _] : all.items()) {
    if (name.front() != '_') out.push_back(name);
  }
  return out;
}

Json minimal_registry() {
  return Json::parse(R"({
    "schema_version": 1, "registry_version": "t",
    "constructs": [{"name": "for loop", "category": "c", "features": ["node:for"]}],
    "special_cases": [{"id": "r", "description": "d", "verifier": "tree", "origin": "published",
                       "all_of": ["feature:recursion"]}]
  })");
}

void expect_registry_error(const Json& doc, const std::string& field_fragment) {
  try {
    ConstructRegistry::from_json(doc);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(field_fragment) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("operator combination in one expression") {
  auto s = extract_constructs("def f(x,y): return x + y / 2");
  for (const char* name : {"function definition", "operator +", "operator /", "combo +and/"}) {
    CAPTURE(name);
    CHECK(has(s, name));
  }
  CHECK_FALSE(s.parse_failed);
}

TEST_CASE("empty source yields nothing") {
  auto s = extract_constructs("");
  CHECK(s.constructs.empty());
  CHECK_FALSE(s.parse_failed);
}

TEST_CASE("method chaining is detected textually") {
  CHECK(has(extract_constructs("x.a().b()"), "method chaining"));
  CHECK_FALSE(has(extract_constructs("x.a()\ny.b()\n"), "method chaining"));
}

TEST_CASE("self-calling function is recursion") {
  CHECK(has(extract_constructs(testing::fixture("constructs/factorial.py")), "recursion"));
  CHECK_FALSE(has(extract_constructs("def f(n):\n    return g(n)\n"), "recursion"));
  // A method named like a module-level function is a different callee.
  CHECK_FALSE(has(extract_constructs("def size(x):\n    return 1\nclass A:\n    def size(self):\n        return size(self)\n"),
                  "recursion"));
}

TEST_CASE("combos stay within one statement") {
  auto s = extract_constructs(testing::fixture("constructs/split_statements.py"));
  CHECK(has(s, "operator +"));
  CHECK(has(s, "operator /"));
  CHECK_FALSE(has(s, "combo +and/"));
}

TEST_CASE("unparseable source degrades to textual detection") {
  auto s = extract_constructs(testing::fixture("programs/is_palindrome.py"));
  CHECK(s.parse_failed);
  CHECK(s.syntax_error_line == 5);
  for (const char* name : {"function definition", "for loop", "if statement", "else clause", "return statement"}) {
    CAPTURE(name);
    CHECK(has(s, name));
  }
  // Tree-only constructs need a tree.
  CHECK_FALSE(has(s, "operator +"));
}

TEST_CASE("vocabulary is sorted, stable and large enough") {
  auto v = construct_vocabulary();
  CHECK(v == construct_vocabulary());
  CHECK(v.size() >= 80);
  CHECK(std::is_sorted(v.begin(), v.end()));
  CHECK(std::adjacent_find(v.begin(), v.end()) == v.end());
  for (const char* name : {"str.split", "list.append", "method chaining", "recursion", "class __init__", "for loop"}) {
    CAPTURE(name);
    CHECK(std::binary_search(v.begin(), v.end(), std::string(name)));
  }
}

TEST_CASE("extracted names always come from the vocabulary") {
  auto v = construct_vocabulary();
  for (const auto& file : corpus_files()) {
    for (const auto& c : extract_constructs(testing::fixture("constructs/" + file)).constructs) {
      CAPTURE(file);
      CAPTURE(c);
      CHECK(std::binary_search(v.begin(), v.end(), c));
    }
  }
}

TEST_CASE("every registered construct is detectable") {
  // Guards against feature keys in the data file that the scanner never emits.
  std::set<std::string> seen;
  for (const auto& file : corpus_files()) {
    auto s = extract_constructs(testing::fixture("constructs/" + file));
    if (!s.parse_failed) seen.insert(s.constructs.begin(), s.constructs.end());
  }
  for (const auto& name : construct_vocabulary()) {
    CAPTURE(name);
    CHECK(seen.contains(name));
  }
}

TEST_CASE("published patterns") {
  CHECK(matches_pattern(testing::fixture("constructs/factorial.py"), "recursion"));
  CHECK_FALSE(matches_pattern(testing::fixture("constructs/point_no_init.py"), "class_init"));
  CHECK(matches_pattern(testing::fixture("constructs/tree_depth.py"), "class_init"));
  CHECK(matches_pattern("a + b / c\n", "precedence_add_div"));
  CHECK_FALSE(matches_pattern("a + b\n", "precedence_add_div"));
}

TEST_CASE("unknown pattern id is an error") {
  CHECK_THROWS_AS(matches_pattern("x = 1\n", "no_such_pattern"), Error);
}

TEST_CASE("special-case verifiers agree with hand labels") {
  const auto& reg = ConstructRegistry::builtin();
  const Json l = labels();
  for (const auto& file : corpus_files()) {
    const std::string source = testing::fixture("constructs/" + file);
    const Json& expected = l[file];
    std::set<std::string> want;
    for (const auto& id : expected["patterns"]) want.insert(id.get<std::string>());
    CAPTURE(file);
    CHECK(reg.extract(source).parse_failed == expected["parse_failed"].get<bool>());
    for (const auto& p : reg.patterns()) {
      CAPTURE(p.id);
      CHECK(reg.matches(source, p.id) == want.contains(p.id));
    }
  }
}

TEST_CASE("registry flags which special cases are published") {
  const auto& patterns = ConstructRegistry::builtin().patterns();
  CHECK(patterns.size() == 16);
  std::set<std::string> published;
  for (const auto& p : patterns) {
    if (p.origin == "published") published.insert(p.id);
    else CHECK(p.origin == "implementer-designed");
  }
  CHECK(published == std::set<std::string>{"recursion", "class_init", "precedence_add_div"});
}

TEST_CASE("monotone under concatenation of parseable fragments") {
  std::vector<std::string> sources;
  for (const auto& file : corpus_files()) {
    auto text = testing::fixture("constructs/" + file);
    if (!extract_constructs(text).parse_failed) sources.push_back(text);
  }
  for (const auto& a : sources) {
    const auto base = extract_constructs(a).constructs;
    for (const auto& b : sources) {
      const auto joined = extract_constructs(a + "\n" + b);
      REQUIRE_FALSE(joined.parse_failed);
      CHECK(std::includes(joined.constructs.begin(), joined.constructs.end(), base.begin(), base.end()));
    }
  }
}

TEST_CASE("extraction is deterministic") {
  const auto text = testing::fixture("constructs/kitchen_sink.py");
  CHECK(extract_constructs(text) == extract_constructs(text));
  CHECK(source_features(text) == source_features(text));
}

TEST_CASE("checked-in registry file loads and matches the embedded copy") {
  auto reg = ConstructRegistry::load(std::filesystem::path(SOCDBG_DATA) / "constructs.json");
  CHECK(reg.vocabulary() == construct_vocabulary());
  CHECK(reg.version() == ConstructRegistry::builtin().version());
}

TEST_CASE("registry validation") {
  CHECK_NOTHROW(ConstructRegistry::from_json(minimal_registry()));

  auto dup = minimal_registry();
  dup["constructs"].push_back(dup["constructs"][0]);
  expect_registry_error(dup, "duplicate construct");

  auto bad_key = minimal_registry();
  bad_key["constructs"][0]["features"] = Json::array({"loop:for"});
  expect_registry_error(bad_key, "unknown feature key");

  auto bad_regex = minimal_registry();
  bad_regex["constructs"][0]["regex"] = "(unclosed";
  expect_registry_error(bad_regex, "constructs[0].regex");

  auto textual = minimal_registry();
  textual["special_cases"][0]["verifier"] = "textual";
  expect_registry_error(textual, "needs a regex");

  auto origin = minimal_registry();
  origin["special_cases"][0]["origin"] = "folklore";
  expect_registry_error(origin, "origin");

  auto extra = minimal_registry();
  extra["constructs"][0]["colour"] = "red";
  expect_registry_error(extra, "colour");
}
