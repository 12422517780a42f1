#include "socdbg/constructs.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>

#include "socdbg/assets.hpp"
#include "socdbg/jsonl.hpp"
#include "socdbg/python/ast.hpp"

namespace socdbg {

using python::Node;
using python::NodeKind;

std::string_view to_string(VerifierKind k) {
  switch (k) {
    case VerifierKind::tree: return "tree";
    case VerifierKind::textual: return "textual";
    case VerifierKind::combined: return "combined";
  }
  return "?";
}

namespace {

// Order used to spell combo keys, e.g. "combo:+&/".
constexpr std::array<std::string_view, 7> kArithmetic = {"+", "-", "*", "/", "//", "%", "**"};

constexpr std::array<std::string_view, 16> kStringResultMethods = {
    "upper", "lower", "strip", "lstrip", "rstrip", "replace", "capitalize", "title",
    "swapcase", "casefold", "center", "ljust", "rjust", "zfill", "format", "join"};

bool is_statement(NodeKind k) {
  switch (k) {
    case NodeKind::FunctionDef: case NodeKind::ClassDef: case NodeKind::Return:
    case NodeKind::Delete: case NodeKind::Assign: case NodeKind::AugAssign:
    case NodeKind::AnnAssign: case NodeKind::For: case NodeKind::While: case NodeKind::If:
    case NodeKind::With: case NodeKind::Raise: case NodeKind::Try: case NodeKind::ExceptHandler:
    case NodeKind::Assert: case NodeKind::Import: case NodeKind::ImportFrom:
    case NodeKind::Global: case NodeKind::Nonlocal: case NodeKind::ExprStmt:
    case NodeKind::Pass: case NodeKind::Break: case NodeKind::Continue:
      return true;
    default:
      return false;
  }
}

bool is_call_to(const Node& n, std::string_view name) {
  return n.is(NodeKind::Call) && !n.children.empty() && n.children[0].is(NodeKind::Name) &&
         n.children[0].name == name;
}

bool is_negative_int(const Node& n) {
  return n.is(NodeKind::UnaryOp) && n.op == "-" && n.children.size() == 1 &&
         n.children[0].is(NodeKind::Constant) && n.children[0].op == "int";
}

bool is_mutable_display(const Node& n) {
  switch (n.kind) {
    case NodeKind::List: case NodeKind::Dict: case NodeKind::Set:
    case NodeKind::ListComp: case NodeKind::DictComp: case NodeKind::SetComp:
      return true;
    default:
      return false;
  }
}

class FeatureScanner {
 public:
  std::set<std::string> run(const Node& module) {
    visit(module);
    return std::move(out_);
  }

 private:
  void add(std::string key) { out_.insert(std::move(key)); }

  void visit_children(const Node& n) {
    for (const auto& c : n.children) visit(c);
  }

  void visit(const Node& n) {
    if (is_statement(n.kind)) combos(n);
    switch (n.kind) {
      case NodeKind::FunctionDef: return function(n);
      case NodeKind::ClassDef: return class_def(n);
      case NodeKind::For: return for_loop(n);
      case NodeKind::While: return while_loop(n);
      case NodeKind::If: return if_stmt(n);
      case NodeKind::Call: return call(n);
      case NodeKind::Return:
        add("node:return");
        if (fn_names_.size() > 0 && loop_depth_ > 0) add("feature:return_in_loop");
        break;
      case NodeKind::Assign:
        for (std::size_t i = 0; i + 1 < n.children.size(); ++i) {
          if (n.children[i].is(NodeKind::Tuple) || n.children[i].is(NodeKind::List)) {
            add("feature:tuple_unpacking");
          }
        }
        break;
      case NodeKind::Attribute:
        add("node:attribute");
        if (n.children[0].is(NodeKind::Name) && n.children[0].name == "self") add("feature:self_attribute");
        break;
      case NodeKind::Subscript: {
        add("node:subscript");
        const Node& index = n.children[1];
        if (is_negative_int(index)) add("feature:negative_index");
        if (index.is(NodeKind::Slice)) {
          for (const auto& bound : index.children) {
            if (is_negative_int(bound)) add("feature:negative_index");
          }
        }
        break;
      }
      case NodeKind::BinOp: add("binop:" + n.op); break;
      case NodeKind::UnaryOp: add("unary:" + n.op); break;
      case NodeKind::BoolOp:
        add("boolop:" + n.op);
        for (const auto& c : n.children) {
          if (c.is(NodeKind::Compare)) add("feature:boolop_with_compare");
        }
        break;
      case NodeKind::Compare:
        for (const auto& op : n.ops) add("cmp:" + op);
        if (n.ops.size() > 1) add("feature:chained_comparison");
        break;
      case NodeKind::Constant:
        if (n.op == "int" || n.op == "float" || n.op == "str" || n.op == "fstring" || n.op == "bool" ||
            n.op == "none") {
          add("node:" + n.op);
        }
        break;
      case NodeKind::Try:
        for (const auto& c : n.children) {
          if (c.is(NodeKind::ExceptHandler)) add("node:except");
          if (c.is(NodeKind::Block) && c.op == "finally") add("node:finally");
        }
        break;
      case NodeKind::Keyword: add("feature:keyword_arg"); break;
      case NodeKind::Lambda: add("node:lambda"); break;
      case NodeKind::Yield:
      case NodeKind::YieldFrom: add("node:yield"); break;
      case NodeKind::Import: add("node:import"); break;
      case NodeKind::ImportFrom: add("node:from_import"); break;
      case NodeKind::Global: add("node:global"); break;
      case NodeKind::Nonlocal: add("node:nonlocal"); break;
      case NodeKind::Pass: add("node:pass"); break;
      case NodeKind::Break: add("node:break"); break;
      case NodeKind::Continue: add("node:continue"); break;
      case NodeKind::Delete: add("node:del"); break;
      case NodeKind::Assert: add("node:assert"); break;
      case NodeKind::Raise: add("node:raise"); break;
      case NodeKind::With: add("node:with"); break;
      case NodeKind::AugAssign: add("node:augassign"); break;
      case NodeKind::NamedExpr: add("node:namedexpr"); break;
      case NodeKind::IfExp: add("node:ifexp"); break;
      case NodeKind::Decorator: add("node:decorator"); break;
      case NodeKind::List: add("node:list"); break;
      case NodeKind::Tuple: add("node:tuple"); break;
      case NodeKind::Dict: add("node:dict"); break;
      case NodeKind::Set: add("node:set"); break;
      case NodeKind::ListComp: add("node:listcomp"); break;
      case NodeKind::SetComp: add("node:setcomp"); break;
      case NodeKind::DictComp: add("node:dictcomp"); break;
      case NodeKind::GeneratorExp: add("node:genexp"); break;
      case NodeKind::Starred: add("node:starred"); break;
      case NodeKind::Slice: add("node:slice"); break;
      default: break;
    }
    visit_children(n);
  }

  void function(const Node& n) {
    add("node:def");
    if (!fn_names_.empty()) add("feature:nested_function");
    for (const auto& arg : n.children[0].children) {
      if (arg.op == "*" && !arg.name.empty()) add("feature:star_args");
      if (arg.op == "**") add("feature:star_kwargs");
      if (!arg.children.empty()) {
        add("feature:default_param");
        if (is_mutable_display(arg.children[0])) add("feature:mutable_default");
      }
    }
    // Defaults and decorators belong to the enclosing scope.
    visit(n.children[0]);
    for (std::size_t i = 2; i < n.children.size(); ++i) visit(n.children[i]);
    const int saved_depth = loop_depth_;
    loop_depth_ = 0;
    const bool saved_class = in_class_body_;
    fn_names_.push_back(n.name);
    fn_is_method_.push_back(in_class_body_);
    in_class_body_ = false;
    visit(n.children[1]);
    in_class_body_ = saved_class;
    fn_is_method_.pop_back();
    fn_names_.pop_back();
    loop_depth_ = saved_depth;
  }

  void class_def(const Node& n) {
    add("node:class");
    const Node& body = n.children[0];
    for (const auto& stmt : body.children) {
      if (!stmt.is(NodeKind::FunctionDef)) continue;
      add("feature:method_def");
      if (stmt.name == "__init__") add("feature:class_init");
    }
    for (std::size_t i = 1; i < n.children.size(); ++i) {
      if (!n.children[i].is(NodeKind::Decorator) && !n.children[i].is(NodeKind::Keyword)) {
        add("feature:inheritance");
      }
    }
    const int saved_depth = loop_depth_;
    const bool saved_class = in_class_body_;
    loop_depth_ = 0;
    in_class_body_ = true;
    visit_children(n);
    in_class_body_ = saved_class;
    loop_depth_ = saved_depth;
  }

  void loop_body(const Node& n, std::size_t body_index) {
    if (loop_depth_ > 0) add("feature:nested_loop");
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      if (i == body_index) {
        ++loop_depth_;
        visit(n.children[i]);
        --loop_depth_;
      } else {
        visit(n.children[i]);
      }
    }
  }

  void for_loop(const Node& n) {
    add("node:for");
    if (n.children.size() == 4) add("node:for_else");
    const Node& target = n.children[0];
    if (target.is(NodeKind::Tuple) || target.is(NodeKind::List)) add("feature:tuple_unpacking");
    const Node& iter = n.children[1];
    if (is_call_to(iter, "range")) {
      add("feature:for_over_range");
      for (std::size_t i = 1; i < iter.children.size(); ++i) {
        if (is_call_to(iter.children[i], "len")) add("feature:for_over_range_len");
      }
    }
    loop_body(n, 2);
  }

  void while_loop(const Node& n) {
    add("node:while");
    if (n.children.size() == 3) add("node:while_else");
    condition(n.children[0]);
    loop_body(n, 1);
  }

  void if_stmt(const Node& n) {
    add(n.op == "elif" ? "node:elif" : "node:if");
    condition(n.children[0]);
    if (n.children.size() == 3 && n.children[2].is(NodeKind::Block)) add("node:else");
    visit_children(n);
  }

  void condition(const Node& test) {
    python::walk(test, [&](const Node& c) {
      if (c.is(NodeKind::Lambda)) return false;
      if (c.is(NodeKind::Compare) &&
          std::find(c.ops.begin(), c.ops.end(), "==") != c.ops.end()) {
        add("feature:eq_in_condition");
      }
      return true;
    });
  }

  void call(const Node& n) {
    const Node& func = n.children[0];
    const std::size_t positional = n.children.size() - 1;
    if (func.is(NodeKind::Name)) {
      add("call:" + func.name);
      // A bare name never resolves to a method, so only plain functions count.
      for (std::size_t i = 0; i < fn_names_.size(); ++i) {
        if (fn_names_[i] == func.name && !fn_is_method_[i]) add("feature:recursion");
      }
      if (func.name == "print" && !fn_names_.empty()) add("feature:print_in_function");
    } else if (func.is(NodeKind::Attribute)) {
      add("method:" + func.name);
      const Node& receiver = func.children[0];
      if (receiver.is(NodeKind::Name) && receiver.name == "self" && !fn_names_.empty() &&
          fn_is_method_.back() && fn_names_.back() == func.name) {
        add("feature:recursion");
      }
      if (func.name == "pop" && positional > 0) add("feature:pop_with_argument");
      if (std::find(kStringResultMethods.begin(), kStringResultMethods.end(), func.name) !=
          kStringResultMethods.end()) {
        add("feature:str_method_call");
      }
    }
    visit_children(n);
  }

  // Arithmetic operators sharing one statement-level expression.
  void combos(const Node& stmt) {
    std::set<std::string> ops;
    for (const auto& c : stmt.children) {
      if (c.is(NodeKind::Block) || is_statement(c.kind)) continue;
      python::walk(c, [&](const Node& e) {
        if (e.is(NodeKind::Block) || is_statement(e.kind)) return false;
        if (e.is(NodeKind::BinOp)) ops.insert(e.op);
        return true;
      });
    }
    for (std::size_t i = 0; i < kArithmetic.size(); ++i) {
      if (!ops.contains(std::string(kArithmetic[i]))) continue;
      for (std::size_t j = i + 1; j < kArithmetic.size(); ++j) {
        if (ops.contains(std::string(kArithmetic[j]))) {
          add("combo:" + std::string(kArithmetic[i]) + "&" + std::string(kArithmetic[j]));
        }
      }
    }
  }

  std::set<std::string> out_;
  std::vector<std::string> fn_names_;
  std::vector<bool> fn_is_method_;
  bool in_class_body_ = false;
  int loop_depth_ = 0;
};

bool search_lines(const std::regex& re, std::string_view source) {
  std::size_t start = 0;
  while (start <= source.size()) {
    std::size_t end = source.find('\n', start);
    if (end == std::string_view::npos) end = source.size();
    const auto line = source.substr(start, end - start);
    if (std::regex_search(line.begin(), line.end(), re)) return true;
    start = end + 1;
  }
  return false;
}

constexpr std::array<std::string_view, 9> kFeaturePrefixes = {
    "node:", "binop:", "unary:", "cmp:", "boolop:", "call:", "method:", "feature:", "combo:"};

void check_feature_key(const std::string& key, const std::string& field) {
  for (auto prefix : kFeaturePrefixes) {
    if (key.size() > prefix.size() && key.compare(0, prefix.size(), prefix) == 0) return;
  }
  throw DataError(field, "unknown feature key '" + key + "'");
}

std::regex compile(const std::string& pattern, const std::string& field) {
  try {
    return std::regex(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw DataError(field, std::string("invalid regex: ") + e.what());
  }
}

std::vector<std::string> opt_list(jsonl::ObjectReader& r, std::string_view key) {
  if (!r.opt_any(key)) return {};
  return r.str_list(key);
}

}  // namespace

std::set<std::string> source_features(std::string_view source) {
  return FeatureScanner().run(python::parse_module(source));
}

ConstructRegistry ConstructRegistry::from_json(const Json& doc) {
  ConstructRegistry reg;
  jsonl::ObjectReader top(doc);
  if (top.integer("schema_version") != 1) throw DataError("schema_version", "unsupported version");
  reg.version_ = top.str("registry_version");
  top.opt_str("note");

  const Json& constructs = top.any("constructs");
  if (!constructs.is_array()) throw DataError("constructs", "expected an array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < constructs.size(); ++i) {
    const std::string path = "constructs[" + std::to_string(i) + "]";
    jsonl::ObjectReader r(constructs[i], path);
    ConstructDef def;
    def.name = r.str("name");
    def.category = r.str("category");
    def.features = opt_list(r, "features");
    def.regex = r.opt_str("regex");
    def.fallback_regex = r.opt_str("fallback_regex");
    r.finish();
    if (def.name.empty()) throw DataError(r.field("name"), "must not be empty");
    if (!names.insert(def.name).second) throw DataError(r.field("name"), "duplicate construct '" + def.name + "'");
    if (def.features.empty() && !def.regex) throw DataError(path, "needs features or a regex");
    for (const auto& f : def.features) check_feature_key(f, r.field("features"));
    Compiled c;
    if (def.regex) c.regex = compile(*def.regex, r.field("regex"));
    if (def.fallback_regex) c.fallback = compile(*def.fallback_regex, r.field("fallback_regex"));
    reg.constructs_.push_back(std::move(def));
    reg.compiled_.push_back(std::move(c));
  }

  const Json& patterns = top.any("special_cases");
  if (!patterns.is_array()) throw DataError("special_cases", "expected an array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    const std::string path = "special_cases[" + std::to_string(i) + "]";
    jsonl::ObjectReader r(patterns[i], path);
    PatternDef p;
    p.id = r.str("id");
    p.description = r.str("description");
    const std::string verifier = r.str("verifier");
    if (verifier == "tree") p.verifier = VerifierKind::tree;
    else if (verifier == "textual") p.verifier = VerifierKind::textual;
    else if (verifier == "combined") p.verifier = VerifierKind::combined;
    else throw DataError(r.field("verifier"), "unknown verifier kind '" + verifier + "'");
    p.origin = r.str("origin");
    if (p.origin != "published" && p.origin != "implementer-designed") {
      throw DataError(r.field("origin"), "must be 'published' or 'implementer-designed'");
    }
    p.all_of = opt_list(r, "all_of");
    p.any_of = opt_list(r, "any_of");
    p.regex = r.opt_str("regex");
    r.finish();
    if (!ids.insert(p.id).second) throw DataError(r.field("id"), "duplicate pattern '" + p.id + "'");
    const bool structural = !p.all_of.empty() || !p.any_of.empty();
    if (p.verifier != VerifierKind::textual && !structural) throw DataError(path, "tree verifier needs all_of or any_of");
    if (p.verifier != VerifierKind::tree && !p.regex) throw DataError(path, "textual verifier needs a regex");
    for (const auto& f : p.all_of) check_feature_key(f, r.field("all_of"));
    for (const auto& f : p.any_of) check_feature_key(f, r.field("any_of"));
    reg.pattern_regex_.push_back(p.regex ? std::optional(compile(*p.regex, r.field("regex"))) : std::nullopt);
    reg.patterns_.push_back(std::move(p));
  }
  top.finish();
  return reg;
}

ConstructRegistry ConstructRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  Json doc;
  try {
    doc = Json::parse(buf.str());
  } catch (const Json::parse_error& e) {
    throw DataError("", std::string("invalid JSON: ") + e.what());
  }
  return from_json(doc);
}

const ConstructRegistry& ConstructRegistry::builtin() {
  static const ConstructRegistry reg = from_json(Json::parse(assets::get("constructs.json")));
  return reg;
}

std::vector<std::string> ConstructRegistry::vocabulary() const {
  std::vector<std::string> out;
  for (const auto& c : constructs_) out.push_back(c.name);
  std::sort(out.begin(), out.end());
  return out;
}

bool ConstructRegistry::has_construct(std::string_view name) const {
  return std::any_of(constructs_.begin(), constructs_.end(), [&](const auto& c) { return c.name == name; });
}

const PatternDef& ConstructRegistry::pattern(std::string_view id) const {
  for (const auto& p : patterns_) {
    if (p.id == id) return p;
  }
  throw Error("unknown special-case pattern '" + std::string(id) + "'");
}

ConstructSet ConstructRegistry::extract(std::string_view source) const {
  ConstructSet out;
  std::set<std::string> features;
  try {
    features = source_features(source);
  } catch (const python::SyntaxError& e) {
    out.parse_failed = true;
    out.syntax_error_line = e.line();
  }
  for (std::size_t i = 0; i < constructs_.size(); ++i) {
    const auto& def = constructs_[i];
    const auto& re = compiled_[i];
    bool present = std::any_of(def.features.begin(), def.features.end(),
                               [&](const auto& f) { return features.contains(f); });
    if (!present && re.regex) present = search_lines(*re.regex, source);
    if (!present && out.parse_failed && re.fallback) present = search_lines(*re.fallback, source);
    if (present) out.constructs.insert(def.name);
  }
  return out;
}

bool ConstructRegistry::matches(std::string_view source, std::string_view pattern_id) const {
  const PatternDef& p = pattern(pattern_id);
  const auto index = static_cast<std::size_t>(&p - patterns_.data());
  bool tree = true;
  if (p.verifier != VerifierKind::textual) {
    std::set<std::string> features;
    try {
      features = source_features(source);
    } catch (const python::SyntaxError&) {
      return false;
    }
    const auto has = [&](const std::string& f) { return features.contains(f); };
    tree = std::all_of(p.all_of.begin(), p.all_of.end(), has) &&
           (p.any_of.empty() || std::any_of(p.any_of.begin(), p.any_of.end(), has));
  }
  if (!tree) return false;
  if (p.verifier == VerifierKind::tree) return true;
  return search_lines(*pattern_regex_[index], source);
}

ConstructSet extract_constructs(std::string_view source) { return ConstructRegistry::builtin().extract(source); }

bool matches_pattern(std::string_view source, std::string_view pattern_id) {
  return ConstructRegistry::builtin().matches(source, pattern_id);
}

std::vector<std::string> construct_vocabulary() { return ConstructRegistry::builtin().vocabulary(); }

}  // namespace socdbg
