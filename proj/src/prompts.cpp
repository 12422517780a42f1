#include "socdbg/prompts.hpp"

#include <set>

#include "socdbg/assets.hpp"
#include "socdbg/error.hpp"
#include "socdbg/gateway.hpp"

namespace socdbg::prompts {

std::string_view asset(std::string_view name) {
  auto text = assets::find("prompts/" + std::string(name));
  if (!text) throw Error("unknown prompt asset: " + std::string(name));
  return *text;
}

std::string fill(std::string_view tmpl, const Vars& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::set<std::string_view> used;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    const std::string_view name = tmpl.substr(open + 2, close - open - 2);
    auto it = vars.find(name);
    if (it == vars.end()) throw Error("prompt placeholder {{" + std::string(name) + "}} has no value");
    used.insert(it->first);
    out.append(tmpl.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  for (const auto& [name, value] : vars)
    if (!used.count(name)) throw Error("prompt template has no placeholder {{" + name + "}}");
  return out;
}

std::string version(std::initializer_list<std::string_view> names) {
  std::string material;
  for (auto name : names) {
    material.append(name);
    material.push_back('\0');
    material.append(asset(name));
    material.push_back('\0');
  }
  return sha256_hex(material);
}

}  // namespace socdbg::prompts
