#pragma once

#include <initializer_list>
#include <map>
#include <string>
#include <string_view>

namespace socdbg::prompts {

using Vars = std::map<std::string, std::string, std::less<>>;

/// Template text from data/prompts.
std::string_view asset(std::string_view name);

/// Replaces every {{name}} in one pass; substituted text is not rescanned.
/// Throws Error for a placeholder without a value or a value without a
/// placeholder.
std::string fill(std::string_view tmpl, const Vars& vars);

/// SHA-256 (hex) over the named assets, in order; recorded with every
/// generated artifact.
std::string version(std::initializer_list<std::string_view> names);

}  // namespace socdbg::prompts
