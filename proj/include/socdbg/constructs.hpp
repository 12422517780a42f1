#pragma once

#include <filesystem>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "socdbg/model.hpp"

namespace socdbg {

struct ConstructSet {
  std::set<std::string> constructs;
  // Source did not parse; only textual detectors contributed.
  bool parse_failed = false;
  std::optional<int> syntax_error_line;

  bool operator==(const ConstructSet&) const = default;
};

enum class VerifierKind { tree, textual, combined };

std::string_view to_string(VerifierKind k);

struct ConstructDef {
  std::string name;
  std::string category;
  std::vector<std::string> features;  // present if any feature is present
  std::optional<std::string> regex;           // always applied, line by line
  std::optional<std::string> fallback_regex;  // applied only when parsing fails
};

struct PatternDef {
  std::string id;
  std::string description;
  VerifierKind verifier = VerifierKind::tree;
  std::string origin;  // "published" or "implementer-designed"
  std::vector<std::string> all_of;
  std::vector<std::string> any_of;
  std::optional<std::string> regex;
};

/// Structural facts about a parsed module, as feature keys:
///   node:<kind>  binop:<op>  unary:<op>  cmp:<op>  boolop:<op>
///   call:<name>  method:<name>  feature:<fact>  combo:<op>&<op>
/// Throws python::SyntaxError.
std::set<std::string> source_features(std::string_view source);

class ConstructRegistry {
 public:
  /// The registry compiled in from data/constructs.json.
  static const ConstructRegistry& builtin();
  static ConstructRegistry from_json(const Json& doc);
  static ConstructRegistry load(const std::filesystem::path& path);

  const std::string& version() const { return version_; }
  const std::vector<ConstructDef>& constructs() const { return constructs_; }
  const std::vector<PatternDef>& patterns() const { return patterns_; }

  /// Sorted, duplicate-free construct names.
  std::vector<std::string> vocabulary() const;
  bool has_construct(std::string_view name) const;

  /// Throws Error for an unknown id.
  const PatternDef& pattern(std::string_view id) const;

  ConstructSet extract(std::string_view source) const;
  bool matches(std::string_view source, std::string_view pattern_id) const;

 private:
  struct Compiled {
    std::optional<std::regex> regex;
    std::optional<std::regex> fallback;
  };

  std::string version_;
  std::vector<ConstructDef> constructs_;
  std::vector<Compiled> compiled_;
  std::vector<PatternDef> patterns_;
  std::vector<std::optional<std::regex>> pattern_regex_;
};

ConstructSet extract_constructs(std::string_view source);
bool matches_pattern(std::string_view source, std::string_view pattern_id);
std::vector<std::string> construct_vocabulary();

}  // namespace socdbg
