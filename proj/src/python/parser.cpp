#include <algorithm>
#include <array>
#include <cctype>

#include "socdbg/python/ast.hpp"
#include "socdbg/python/tokenizer.hpp"

namespace socdbg::python {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
#define SOCDBG_KIND(k) \
  case NodeKind::k:    \
    return #k;
    SOCDBG_KIND(Module) SOCDBG_KIND(Block) SOCDBG_KIND(FunctionDef) SOCDBG_KIND(ClassDef)
    SOCDBG_KIND(Decorator) SOCDBG_KIND(Arguments) SOCDBG_KIND(Arg) SOCDBG_KIND(Return)
    SOCDBG_KIND(Delete) SOCDBG_KIND(Assign) SOCDBG_KIND(AugAssign) SOCDBG_KIND(AnnAssign)
    SOCDBG_KIND(For) SOCDBG_KIND(While) SOCDBG_KIND(If) SOCDBG_KIND(With) SOCDBG_KIND(WithItem)
    SOCDBG_KIND(Raise) SOCDBG_KIND(Try) SOCDBG_KIND(ExceptHandler) SOCDBG_KIND(Assert)
    SOCDBG_KIND(Import) SOCDBG_KIND(ImportFrom) SOCDBG_KIND(Alias) SOCDBG_KIND(Global)
    SOCDBG_KIND(Nonlocal) SOCDBG_KIND(ExprStmt) SOCDBG_KIND(Pass) SOCDBG_KIND(Break)
    SOCDBG_KIND(Continue) SOCDBG_KIND(BoolOp) SOCDBG_KIND(NamedExpr) SOCDBG_KIND(BinOp)
    SOCDBG_KIND(UnaryOp) SOCDBG_KIND(Lambda) SOCDBG_KIND(IfExp) SOCDBG_KIND(Dict)
    SOCDBG_KIND(KeyValue) SOCDBG_KIND(Set) SOCDBG_KIND(ListComp) SOCDBG_KIND(SetComp)
    SOCDBG_KIND(DictComp) SOCDBG_KIND(GeneratorExp) SOCDBG_KIND(Comprehension) SOCDBG_KIND(Await)
    SOCDBG_KIND(Yield) SOCDBG_KIND(YieldFrom) SOCDBG_KIND(Compare) SOCDBG_KIND(Call)
    SOCDBG_KIND(Keyword) SOCDBG_KIND(Attribute) SOCDBG_KIND(Subscript) SOCDBG_KIND(Starred)
    SOCDBG_KIND(DoubleStarred) SOCDBG_KIND(Name) SOCDBG_KIND(Constant) SOCDBG_KIND(List)
    SOCDBG_KIND(Tuple) SOCDBG_KIND(Slice) SOCDBG_KIND(Empty)
#undef SOCDBG_KIND
  }
  return "?";
}

void walk(const Node& root, const std::function<bool(const Node&)>& visit) {
  if (!visit(root)) return;
  for (const auto& child : root.children) walk(child, visit);
}

namespace {

constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",     "assert", "async", "await", "break",
    "class", "continue", "def",   "del",      "elif",   "else",   "except", "finally", "for",
    "from",  "global", "if",      "import",   "in",     "is",     "lambda", "nonlocal", "not",
    "or",    "pass",   "raise",   "return",   "try",    "while",  "with",  "yield"};

bool is_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

Node make(NodeKind kind, int line) {
  Node n;
  n.kind = kind;
  n.line = line;
  return n;
}

Node empty_node(int line) { return make(NodeKind::Empty, line); }

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Node module() {
    Node mod = make(NodeKind::Module, 1);
    while (!at_kind(TokenKind::End)) {
      if (at_kind(TokenKind::Newline)) {
        advance();
        continue;
      }
      if (at_kind(TokenKind::Indent)) fail("unexpected indent");
      statement(mod.children);
    }
    return mod;
  }

 private:
  // --- token helpers ---------------------------------------------------------
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool at_kind(TokenKind k) const { return peek().kind == k; }
  bool at_op(std::string_view op, std::size_t ahead = 0) const {
    return peek(ahead).kind == TokenKind::Op && peek(ahead).text == op;
  }
  bool at_kw(std::string_view kw, std::size_t ahead = 0) const {
    return peek(ahead).kind == TokenKind::Name && peek(ahead).text == kw;
  }
  int line() const { return peek().line; }
  const Token& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void fail(const std::string& message) const { throw SyntaxError(message, line()); }
  [[noreturn]] void fail_at(const std::string& message, int at) const { throw SyntaxError(message, at); }

  void expect_op(std::string_view op) {
    if (!at_op(op)) fail("invalid syntax (expected '" + std::string(op) + "')");
    advance();
  }
  void expect_kw(std::string_view kw) {
    if (!at_kw(kw)) fail("invalid syntax (expected '" + std::string(kw) + "')");
    advance();
  }
  bool accept_op(std::string_view op) {
    if (!at_op(op)) return false;
    advance();
    return true;
  }
  bool accept_kw(std::string_view kw) {
    if (!at_kw(kw)) return false;
    advance();
    return true;
  }
  std::string identifier() {
    if (!at_kind(TokenKind::Name) || is_keyword(peek().text)) fail("invalid syntax (expected a name)");
    return advance().text;
  }

  // Tokens that may start an expression.
  bool starts_expression() const {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Name:
        if (!is_keyword(t.text)) return true;
        return t.text == "None" || t.text == "True" || t.text == "False" || t.text == "not" ||
               t.text == "lambda" || t.text == "await" || t.text == "yield";
      case TokenKind::Number:
      case TokenKind::String:
        return true;
      case TokenKind::Op:
        return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "-" || t.text == "+" ||
               t.text == "~" || t.text == "..." || t.text == "*";
      default:
        return false;
    }
  }

  // --- statements ------------------------------------------------------------
  void statement(std::vector<Node>& out) {
    if (at_op("@")) {
      out.push_back(decorated());
      return;
    }
    if (at_kind(TokenKind::Name)) {
      const std::string& w = peek().text;
      if (w == "if") return out.push_back(if_stmt());
      if (w == "while") return out.push_back(while_stmt());
      if (w == "for") return out.push_back(for_stmt());
      if (w == "try") return out.push_back(try_stmt());
      if (w == "with") return out.push_back(with_stmt());
      if (w == "def") return out.push_back(funcdef({}));
      if (w == "class") return out.push_back(classdef({}));
      if (w == "async" && (at_kw("def", 1) || at_kw("for", 1) || at_kw("with", 1))) {
        advance();
        Node n = at_kw("def") ? funcdef({}) : at_kw("for") ? for_stmt() : with_stmt();
        n.op = "async";
        out.push_back(std::move(n));
        return;
      }
    }
    simple_statements(out);
  }

  void simple_statements(std::vector<Node>& out) {
    out.push_back(small_statement());
    while (accept_op(";")) {
      if (at_kind(TokenKind::Newline)) break;
      out.push_back(small_statement());
    }
    if (!at_kind(TokenKind::Newline)) fail("invalid syntax");
    advance();
  }

  Node small_statement() {
    const int ln = line();
    if (at_kind(TokenKind::Name)) {
      const std::string w = peek().text;
      if (w == "pass") return advance(), make(NodeKind::Pass, ln);
      if (w == "break") {
        if (loops_.back() == 0) fail("'break' outside loop");
        return advance(), make(NodeKind::Break, ln);
      }
      if (w == "continue") {
        if (loops_.back() == 0) fail("'continue' not properly in loop");
        return advance(), make(NodeKind::Continue, ln);
      }
      if (w == "return") {
        if (functions_ == 0) fail("'return' outside function");
        advance();
        Node n = make(NodeKind::Return, ln);
        if (starts_expression()) n.children.push_back(star_expressions());
        return n;
      }
      if (w == "raise") {
        advance();
        Node n = make(NodeKind::Raise, ln);
        if (starts_expression()) {
          n.children.push_back(expression());
          if (accept_kw("from")) n.children.push_back(expression());
        }
        return n;
      }
      if (w == "global" || w == "nonlocal") {
        advance();
        Node n = make(w == "global" ? NodeKind::Global : NodeKind::Nonlocal, ln);
        do {
          Node name = make(NodeKind::Name, line());
          name.name = identifier();
          n.children.push_back(std::move(name));
        } while (accept_op(","));
        return n;
      }
      if (w == "del") {
        advance();
        Node n = make(NodeKind::Delete, ln);
        Node targets = target_list();
        if (targets.is(NodeKind::Tuple) && !targets.parenthesized) n.children = std::move(targets.children);
        else n.children.push_back(std::move(targets));
        for (const auto& t : n.children) check_target(t, "delete", false);
        return n;
      }
      if (w == "assert") {
        advance();
        Node n = make(NodeKind::Assert, ln);
        n.children.push_back(expression());
        if (accept_op(",")) n.children.push_back(expression());
        return n;
      }
      if (w == "import") return import_stmt();
      if (w == "from") return from_import();
    }
    return expr_statement();
  }

  Node import_stmt() {
    Node n = make(NodeKind::Import, line());
    advance();
    do {
      Node alias = make(NodeKind::Alias, line());
      alias.name = dotted_name();
      if (accept_kw("as")) alias.op = identifier();
      n.children.push_back(std::move(alias));
    } while (accept_op(","));
    return n;
  }

  std::string dotted_name() {
    std::string name = identifier();
    while (accept_op(".")) name += "." + identifier();
    return name;
  }

  Node from_import() {
    Node n = make(NodeKind::ImportFrom, line());
    advance();
    std::string module;
    while (at_op(".") || at_op("...")) module += advance().text;
    if (!at_kw("import")) module += dotted_name();
    n.name = module;
    expect_kw("import");
    if (accept_op("*")) {
      Node alias = make(NodeKind::Alias, line());
      alias.name = "*";
      n.children.push_back(std::move(alias));
      return n;
    }
    const bool paren = accept_op("(");
    do {
      if (paren && at_op(")")) break;
      Node alias = make(NodeKind::Alias, line());
      alias.name = identifier();
      if (accept_kw("as")) alias.op = identifier();
      n.children.push_back(std::move(alias));
    } while (accept_op(","));
    if (paren) expect_op(")");
    return n;
  }

  static bool is_augassign(std::string_view op) {
    static constexpr std::array<std::string_view, 13> ops = {"+=", "-=",  "*=",  "/=",  "//=", "%=", "@=",
                                                             "&=", "|=",  "^=",  "<<=", ">>=", "**="};
    return std::find(ops.begin(), ops.end(), op) != ops.end();
  }

  Node expr_statement() {
    const int ln = line();
    if (at_kw("yield")) {
      Node n = make(NodeKind::ExprStmt, ln);
      n.children.push_back(yield_expr());
      return n;
    }
    Node first = star_expressions();
    if (at_op(":")) {
      advance();
      check_target(first, "annotated assignment", false);
      Node n = make(NodeKind::AnnAssign, ln);
      n.children.push_back(std::move(first));
      n.children.push_back(expression());
      if (accept_op("=")) n.children.push_back(at_kw("yield") ? yield_expr() : star_expressions());
      return n;
    }
    if (peek().kind == TokenKind::Op && is_augassign(peek().text)) {
      std::string op = advance().text;
      op.pop_back();
      if (!first.is(NodeKind::Name) && !first.is(NodeKind::Attribute) && !first.is(NodeKind::Subscript)) {
        fail_at("'" + describe(first) + "' is an illegal expression for augmented assignment", ln);
      }
      Node n = make(NodeKind::AugAssign, ln);
      n.op = op;
      n.children.push_back(std::move(first));
      n.children.push_back(at_kw("yield") ? yield_expr() : star_expressions());
      return n;
    }
    if (at_op("=")) {
      Node n = make(NodeKind::Assign, ln);
      n.children.push_back(std::move(first));
      while (accept_op("=")) n.children.push_back(at_kw("yield") ? yield_expr() : star_expressions());
      for (std::size_t i = 0; i + 1 < n.children.size(); ++i) check_target(n.children[i], "assign to", true);
      return n;
    }
    Node n = make(NodeKind::ExprStmt, ln);
    n.children.push_back(std::move(first));
    return n;
  }

  static std::string describe(const Node& n) {
    switch (n.kind) {
      case NodeKind::Call: return "function call";
      case NodeKind::Constant: return "literal";
      case NodeKind::BinOp: return "expression";
      case NodeKind::Compare: return "comparison";
      default: return std::string(to_string(n.kind));
    }
  }

  void check_target(const Node& n, const std::string& what, bool allow_star) const {
    switch (n.kind) {
      case NodeKind::Name:
      case NodeKind::Attribute:
      case NodeKind::Subscript:
        return;
      case NodeKind::Starred:
        if (!allow_star) break;
        check_target(n.children[0], what, false);
        return;
      case NodeKind::Tuple:
      case NodeKind::List:
        for (const auto& c : n.children) check_target(c, what, allow_star);
        return;
      default:
        break;
    }
    fail_at("cannot " + what + " " + describe(n), n.line);
  }

  Node block() {
    expect_op(":");
    Node body = make(NodeKind::Block, line());
    if (!at_kind(TokenKind::Newline)) {
      simple_statements(body.children);
      return body;
    }
    advance();
    if (!at_kind(TokenKind::Indent)) fail("expected an indented block");
    advance();
    body.line = line();
    while (!at_kind(TokenKind::Dedent) && !at_kind(TokenKind::End)) {
      if (at_kind(TokenKind::Newline)) {
        advance();
        continue;
      }
      if (at_kind(TokenKind::Indent)) fail("unexpected indent");
      statement(body.children);
    }
    if (at_kind(TokenKind::Dedent)) advance();
    return body;
  }

  Node loop_block() {
    ++loops_.back();
    Node body = block();
    --loops_.back();
    return body;
  }

  // Function and class bodies start a fresh loop context; class bodies are
  // not function scopes for return/yield.
  Node scope_block(bool function) {
    const int saved_functions = functions_;
    functions_ = function ? functions_ + 1 : 0;
    loops_.push_back(0);
    Node body = block();
    loops_.pop_back();
    functions_ = saved_functions;
    return body;
  }

  Node if_stmt() {
    Node n = make(NodeKind::If, line());
    advance();
    n.children.push_back(named_expression());
    n.children.push_back(block());
    if (at_kw("elif")) {
      Node elif = if_stmt();
      elif.op = "elif";
      n.children.push_back(std::move(elif));
    } else if (at_kw("else")) {
      advance();
      Node orelse = block();
      orelse.op = "else";
      n.children.push_back(std::move(orelse));
    }
    return n;
  }

  Node while_stmt() {
    Node n = make(NodeKind::While, line());
    advance();
    n.children.push_back(named_expression());
    n.children.push_back(loop_block());
    if (accept_kw("else")) {
      Node orelse = block();
      orelse.op = "else";
      n.children.push_back(std::move(orelse));
    }
    return n;
  }

  Node for_stmt() {
    Node n = make(NodeKind::For, line());
    expect_kw("for");
    Node target = target_list();
    check_target(target, "assign to", true);
    n.children.push_back(std::move(target));
    expect_kw("in");
    n.children.push_back(star_expressions());
    n.children.push_back(loop_block());
    if (accept_kw("else")) {
      Node orelse = block();
      orelse.op = "else";
      n.children.push_back(std::move(orelse));
    }
    return n;
  }

  Node try_stmt() {
    Node n = make(NodeKind::Try, line());
    advance();
    n.children.push_back(block());
    bool handlers = false;
    while (at_kw("except")) {
      handlers = true;
      Node h = make(NodeKind::ExceptHandler, line());
      advance();
      accept_op("*");
      if (!at_op(":")) {
        h.children.push_back(expression());
        if (accept_op(",")) {
          Node tuple = make(NodeKind::Tuple, h.children.back().line);
          tuple.children.push_back(std::move(h.children.back()));
          do {
            tuple.children.push_back(expression());
          } while (accept_op(","));
          h.children.back() = std::move(tuple);
        }
        if (accept_kw("as")) h.name = identifier();
      }
      h.children.push_back(block());
      n.children.push_back(std::move(h));
    }
    if (handlers && accept_kw("else")) {
      Node orelse = block();
      orelse.op = "else";
      n.children.push_back(std::move(orelse));
    }
    if (accept_kw("finally")) {
      Node fin = block();
      fin.op = "finally";
      n.children.push_back(std::move(fin));
    } else if (!handlers) {
      fail("expected 'except' or 'finally' block");
    }
    return n;
  }

  Node with_stmt() {
    Node n = make(NodeKind::With, line());
    expect_kw("with");
    const bool paren = at_op("(") && parenthesized_with_items();
    if (paren) advance();
    do {
      if (paren && at_op(")")) break;
      Node item = make(NodeKind::WithItem, line());
      item.children.push_back(expression());
      if (accept_kw("as")) {
        Node target = target_atom_list();
        check_target(target, "assign to", true);
        item.children.push_back(std::move(target));
      }
      n.children.push_back(std::move(item));
    } while (accept_op(","));
    if (paren) expect_op(")");
    n.children.push_back(block());
    return n;
  }

  // `with (a as b, c as d):` versus `with (a, b) as c:` / `with (a):`.
  bool parenthesized_with_items() const {
    int depth = 0;
    for (std::size_t i = pos_; i < toks_.size(); ++i) {
      const Token& t = toks_[i];
      if (t.kind == TokenKind::Op && (t.text == "(" || t.text == "[" || t.text == "{")) ++depth;
      if (t.kind == TokenKind::Op && (t.text == ")" || t.text == "]" || t.text == "}")) {
        if (--depth == 0) {
          const Token& next = toks_[std::min(i + 1, toks_.size() - 1)];
          return next.kind == TokenKind::Op && next.text == ":";
        }
      }
      if (depth == 1 && t.kind == TokenKind::Name && t.text == "as") return true;
    }
    return false;
  }

  Node decorated() {
    std::vector<Node> decorators;
    while (at_op("@")) {
      Node d = make(NodeKind::Decorator, line());
      advance();
      d.children.push_back(named_expression());
      if (!at_kind(TokenKind::Newline)) fail("invalid syntax");
      advance();
      decorators.push_back(std::move(d));
    }
    if (at_kw("def")) return funcdef(std::move(decorators));
    if (at_kw("class")) return classdef(std::move(decorators));
    if (at_kw("async") && at_kw("def", 1)) {
      advance();
      Node n = funcdef(std::move(decorators));
      n.op = "async";
      return n;
    }
    fail("invalid syntax (expected def or class after decorator)");
  }

  Node funcdef(std::vector<Node> decorators) {
    Node n = make(NodeKind::FunctionDef, line());
    expect_kw("def");
    n.name = identifier();
    expect_op("(");
    n.children.push_back(parameters(")", true));
    expect_op(")");
    if (accept_op("->")) expression();
    n.children.push_back(scope_block(true));
    for (auto& d : decorators) n.children.push_back(std::move(d));
    return n;
  }

  Node parameters(std::string_view closer, bool annotations) {
    Node args = make(NodeKind::Arguments, line());
    bool seen_default = false;
    bool seen_star = false;
    while (!at_op(closer)) {
      Node arg = make(NodeKind::Arg, line());
      if (accept_op("/")) {
        if (!accept_op(",")) break;
        continue;
      }
      if (accept_op("**")) {
        arg.op = "**";
        arg.name = identifier();
        if (annotations && accept_op(":")) expression();
      } else if (accept_op("*")) {
        arg.op = "*";
        seen_star = true;
        if (at_kind(TokenKind::Name)) {
          arg.name = identifier();
          if (annotations && accept_op(":")) expression();
        }
      } else {
        arg.name = identifier();
        if (annotations && accept_op(":")) expression();
        if (accept_op("=")) {
          arg.children.push_back(expression());
          seen_default = true;
        } else if (seen_default && !seen_star) {
          fail("non-default argument follows default argument");
        }
      }
      args.children.push_back(std::move(arg));
      if (!accept_op(",")) break;
    }
    return args;
  }

  Node classdef(std::vector<Node> decorators) {
    Node n = make(NodeKind::ClassDef, line());
    expect_kw("class");
    n.name = identifier();
    std::vector<Node> bases;
    if (accept_op("(")) {
      bases = call_arguments();
      expect_op(")");
    }
    n.children.push_back(scope_block(false));
    for (auto& b : bases) n.children.push_back(std::move(b));
    for (auto& d : decorators) n.children.push_back(std::move(d));
    return n;
  }

  // --- expressions -----------------------------------------------------------
  Node star_expressions() {
    const int ln = line();
    Node first = star_expression();
    if (!at_op(",")) return first;
    Node tuple = make(NodeKind::Tuple, ln);
    tuple.children.push_back(std::move(first));
    while (accept_op(",")) {
      if (!starts_expression()) break;
      tuple.children.push_back(star_expression());
    }
    return tuple;
  }

  Node star_expression() {
    if (at_op("*")) {
      Node n = make(NodeKind::Starred, line());
      advance();
      n.children.push_back(bitwise_or());
      return n;
    }
    return expression();
  }

  Node star_named_expression() {
    if (at_op("*")) return star_expression();
    return named_expression();
  }

  // Targets of for/comprehension/del: stop before `in`.
  Node target_list() {
    const int ln = line();
    Node first = target_atom();
    if (!at_op(",")) return first;
    Node tuple = make(NodeKind::Tuple, ln);
    tuple.children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_kw("in") || at_op("=") || at_kind(TokenKind::Newline) || at_op(";")) break;
      tuple.children.push_back(target_atom());
    }
    return tuple;
  }

  Node target_atom() {
    if (at_op("*")) {
      Node n = make(NodeKind::Starred, line());
      advance();
      n.children.push_back(bitwise_or());
      return n;
    }
    return bitwise_or();
  }

  Node target_atom_list() { return target_atom(); }

  Node named_expression() {
    if (at_kind(TokenKind::Name) && at_op(":=", 1)) {
      Node n = make(NodeKind::NamedExpr, line());
      Node target = make(NodeKind::Name, line());
      target.name = identifier();
      advance();
      n.children.push_back(std::move(target));
      n.children.push_back(expression());
      return n;
    }
    return expression();
  }

  Node expression() {
    if (at_kw("lambda")) return lambda();
    const int ln = line();
    Node body = disjunction();
    if (at_kw("if")) {
      advance();
      Node n = make(NodeKind::IfExp, ln);
      Node test = disjunction();
      expect_kw("else");
      n.children.push_back(std::move(body));
      n.children.push_back(std::move(test));
      n.children.push_back(expression());
      return n;
    }
    return body;
  }

  Node lambda() {
    Node n = make(NodeKind::Lambda, line());
    expect_kw("lambda");
    n.children.push_back(parameters(":", false));
    expect_op(":");
    ++functions_;
    n.children.push_back(expression());
    --functions_;
    return n;
  }

  Node bool_chain(std::string_view op, Node (Parser::*next)()) {
    const int ln = line();
    Node first = (this->*next)();
    if (!at_kw(op)) return first;
    Node n = make(NodeKind::BoolOp, ln);
    n.op = std::string(op);
    n.children.push_back(std::move(first));
    while (accept_kw(op)) n.children.push_back((this->*next)());
    return n;
  }

  Node disjunction() { return bool_chain("or", &Parser::conjunction); }
  Node conjunction() { return bool_chain("and", &Parser::inversion); }

  Node inversion() {
    if (at_kw("not")) {
      Node n = make(NodeKind::UnaryOp, line());
      advance();
      n.op = "not";
      n.children.push_back(inversion());
      return n;
    }
    return comparison();
  }

  std::string comparison_op() {
    if (peek().kind == TokenKind::Op) {
      const std::string& t = peek().text;
      if (t == "==" || t == "!=" || t == "<" || t == "<=" || t == ">" || t == ">=") return advance().text;
      return {};
    }
    if (at_kw("in")) return advance(), "in";
    if (at_kw("not") && at_kw("in", 1)) {
      advance();
      advance();
      return "not in";
    }
    if (at_kw("is")) {
      advance();
      if (accept_kw("not")) return "is not";
      return "is";
    }
    return {};
  }

  Node comparison() {
    const int ln = line();
    Node first = bitwise_or();
    std::string op = comparison_op();
    if (op.empty()) return first;
    Node n = make(NodeKind::Compare, ln);
    n.children.push_back(std::move(first));
    do {
      n.ops.push_back(op);
      n.children.push_back(bitwise_or());
      op = comparison_op();
    } while (!op.empty());
    return n;
  }

  Node binary(std::initializer_list<std::string_view> ops, Node (Parser::*next)()) {
    Node left = (this->*next)();
    for (;;) {
      if (peek().kind != TokenKind::Op) return left;
      const std::string& t = peek().text;
      if (std::find(ops.begin(), ops.end(), t) == ops.end()) return left;
      Node n = make(NodeKind::BinOp, left.line);
      n.op = advance().text;
      n.children.push_back(std::move(left));
      n.children.push_back((this->*next)());
      left = std::move(n);
    }
  }

  Node bitwise_or() { return binary({"|"}, &Parser::bitwise_xor); }
  Node bitwise_xor() { return binary({"^"}, &Parser::bitwise_and); }
  Node bitwise_and() { return binary({"&"}, &Parser::shift_expr); }
  Node shift_expr() { return binary({"<<", ">>"}, &Parser::sum); }
  Node sum() { return binary({"+", "-"}, &Parser::term); }
  Node term() { return binary({"*", "/", "//", "%", "@"}, &Parser::factor); }

  Node factor() {
    if (at_op("-") || at_op("+") || at_op("~")) {
      Node n = make(NodeKind::UnaryOp, line());
      n.op = advance().text;
      n.children.push_back(factor());
      return n;
    }
    return power();
  }

  Node power() {
    Node base = await_primary();
    if (at_op("**")) {
      Node n = make(NodeKind::BinOp, base.line);
      n.op = advance().text;
      n.children.push_back(std::move(base));
      n.children.push_back(factor());
      return n;
    }
    return base;
  }

  Node await_primary() {
    if (at_kw("await")) {
      Node n = make(NodeKind::Await, line());
      advance();
      n.children.push_back(primary());
      return n;
    }
    return primary();
  }

  Node primary() {
    Node n = atom();
    for (;;) {
      if (at_op(".")) {
        advance();
        Node attr = make(NodeKind::Attribute, n.line);
        attr.name = identifier();
        attr.children.push_back(std::move(n));
        n = std::move(attr);
      } else if (at_op("(")) {
        advance();
        Node call = make(NodeKind::Call, n.line);
        call.children.push_back(std::move(n));
        for (auto& a : call_arguments()) call.children.push_back(std::move(a));
        expect_op(")");
        n = std::move(call);
      } else if (at_op("[")) {
        advance();
        Node sub = make(NodeKind::Subscript, n.line);
        sub.children.push_back(std::move(n));
        sub.children.push_back(slices());
        expect_op("]");
        n = std::move(sub);
      } else {
        return n;
      }
    }
  }

  std::vector<Node> call_arguments() {
    std::vector<Node> args;
    bool seen_keyword = false;
    while (!at_op(")")) {
      const int ln = line();
      if (accept_op("*")) {
        Node s = make(NodeKind::Starred, ln);
        s.children.push_back(expression());
        args.push_back(std::move(s));
      } else if (accept_op("**")) {
        Node s = make(NodeKind::DoubleStarred, ln);
        s.children.push_back(expression());
        args.push_back(std::move(s));
        seen_keyword = true;
      } else if (at_kind(TokenKind::Name) && at_op("=", 1) && !is_keyword(peek().text)) {
        Node kw = make(NodeKind::Keyword, ln);
        kw.name = advance().text;
        advance();
        kw.children.push_back(expression());
        args.push_back(std::move(kw));
        seen_keyword = true;
      } else {
        if (seen_keyword) fail("positional argument follows keyword argument");
        Node value = named_expression();
        if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
          Node gen = make(NodeKind::GeneratorExp, ln);
          gen.children.push_back(std::move(value));
          comprehension_clauses(gen);
          value = std::move(gen);
        } else if (at_op("=")) {
          fail("expression cannot contain assignment, perhaps you meant \"==\"?");
        }
        args.push_back(std::move(value));
      }
      if (!accept_op(",")) break;
    }
    if (args.size() > 1) {
      for (const auto& a : args) {
        if (a.is(NodeKind::GeneratorExp) && !a.parenthesized) {
          fail_at("Generator expression must be parenthesized", a.line);
        }
      }
    }
    return args;
  }

  Node slices() {
    const int ln = line();
    Node first = slice_item();
    if (!at_op(",")) return first;
    Node tuple = make(NodeKind::Tuple, ln);
    tuple.children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("]")) break;
      tuple.children.push_back(slice_item());
    }
    return tuple;
  }

  Node slice_item() {
    const int ln = line();
    Node lower = empty_node(ln);
    if (!at_op(":")) {
      Node value = star_named_expression();
      if (!at_op(":")) return value;
      lower = std::move(value);
    }
    Node s = make(NodeKind::Slice, ln);
    expect_op(":");
    Node upper = (at_op(":") || at_op("]") || at_op(",")) ? empty_node(line()) : expression();
    Node step = empty_node(line());
    if (accept_op(":")) {
      if (!at_op("]") && !at_op(",")) step = expression();
    }
    s.children.push_back(std::move(lower));
    s.children.push_back(std::move(upper));
    s.children.push_back(std::move(step));
    return s;
  }

  void comprehension_clauses(Node& comp) {
    while (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      Node c = make(NodeKind::Comprehension, line());
      if (accept_kw("async")) c.op = "async";
      expect_kw("for");
      Node target = target_list();
      check_target(target, "assign to", true);
      c.children.push_back(std::move(target));
      expect_kw("in");
      c.children.push_back(disjunction());
      while (accept_kw("if")) c.children.push_back(disjunction());
      comp.children.push_back(std::move(c));
    }
  }

  Node yield_expr() {
    const int ln = line();
    if (functions_ == 0) fail("'yield' outside function");
    expect_kw("yield");
    if (accept_kw("from")) {
      Node n = make(NodeKind::YieldFrom, ln);
      n.children.push_back(expression());
      return n;
    }
    Node n = make(NodeKind::Yield, ln);
    if (starts_expression()) n.children.push_back(star_expressions());
    return n;
  }

  Node constant(std::string kind, std::string text, int ln) {
    Node n = make(NodeKind::Constant, ln);
    n.op = std::move(kind);
    n.name = std::move(text);
    return n;
  }

  static std::string number_kind(const std::string& text) {
    if (!text.empty() && (text.back() == 'j' || text.back() == 'J')) return "complex";
    if (text.size() > 1 && text[0] == '0' && std::isalpha(static_cast<unsigned char>(text[1]))) return "int";
    if (text.find_first_of(".eE") != std::string::npos) return "float";
    return "int";
  }

  Node atom() {
    const Token& t = peek();
    const int ln = t.line;
    switch (t.kind) {
      case TokenKind::Number: {
        std::string text = advance().text;
        std::string kind = number_kind(text);
        return constant(std::move(kind), std::move(text), ln);
      }
      case TokenKind::String: {
        std::string text;
        bool fstring = false;
        bool bytes = false;
        while (at_kind(TokenKind::String)) {
          const std::string& piece = peek().text;
          const auto quote = piece.find_first_of("'\"");
          std::string prefix = piece.substr(0, quote);
          for (auto& ch : prefix) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
          const bool piece_bytes = prefix.find('b') != std::string::npos;
          if (!text.empty() && piece_bytes != bytes) fail("cannot mix bytes and nonbytes literals");
          if (prefix.find('f') != std::string::npos) fstring = true;
          bytes = piece_bytes;
          if (!text.empty()) text += ' ';
          text += advance().text;
        }
        return constant(fstring ? "fstring" : bytes ? "bytes" : "str", std::move(text), ln);
      }
      case TokenKind::Name: {
        if (t.text == "None") return advance(), constant("none", "None", ln);
        if (t.text == "True" || t.text == "False") {
          std::string text = advance().text;
          return constant("bool", std::move(text), ln);
        }
        if (is_keyword(t.text)) fail("invalid syntax");
        Node n = make(NodeKind::Name, ln);
        n.name = advance().text;
        return n;
      }
      case TokenKind::Op:
        if (t.text == "(") return paren_atom();
        if (t.text == "[") return list_atom();
        if (t.text == "{") return brace_atom();
        if (t.text == "...") return advance(), constant("ellipsis", "...", ln);
        break;
      case TokenKind::Indent:
        fail("unexpected indent");
      case TokenKind::Dedent:
      case TokenKind::Newline:
      case TokenKind::End:
        fail("invalid syntax");
    }
    fail("invalid syntax");
  }

  Node paren_atom() {
    const int ln = line();
    expect_op("(");
    if (accept_op(")")) {
      Node tuple = make(NodeKind::Tuple, ln);
      tuple.parenthesized = true;
      return tuple;
    }
    if (at_kw("yield")) {
      Node y = yield_expr();
      expect_op(")");
      y.parenthesized = true;
      return y;
    }
    Node first = star_named_expression();
    if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      Node gen = make(NodeKind::GeneratorExp, ln);
      gen.children.push_back(std::move(first));
      comprehension_clauses(gen);
      expect_op(")");
      gen.parenthesized = true;
      return gen;
    }
    if (at_op(",")) {
      Node tuple = make(NodeKind::Tuple, ln);
      tuple.children.push_back(std::move(first));
      while (accept_op(",")) {
        if (at_op(")")) break;
        tuple.children.push_back(star_named_expression());
      }
      expect_op(")");
      tuple.parenthesized = true;
      return tuple;
    }
    if (at_op("=")) fail("invalid syntax. Maybe you meant '==' or ':=' instead of '='?");
    expect_op(")");
    first.parenthesized = true;
    return first;
  }

  Node list_atom() {
    const int ln = line();
    expect_op("[");
    Node list = make(NodeKind::List, ln);
    if (accept_op("]")) return list;
    Node first = star_named_expression();
    if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      Node comp = make(NodeKind::ListComp, ln);
      comp.children.push_back(std::move(first));
      comprehension_clauses(comp);
      expect_op("]");
      return comp;
    }
    list.children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("]")) break;
      list.children.push_back(star_named_expression());
    }
    expect_op("]");
    return list;
  }

  Node brace_atom() {
    const int ln = line();
    expect_op("{");
    if (accept_op("}")) return make(NodeKind::Dict, ln);
    if (at_op("**")) return dict_rest(ln, {});
    Node first = star_named_expression();
    if (accept_op(":")) {
      Node kv = make(NodeKind::KeyValue, first.line);
      kv.children.push_back(std::move(first));
      kv.children.push_back(expression());
      if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
        Node comp = make(NodeKind::DictComp, ln);
        comp.children.push_back(std::move(kv));
        comprehension_clauses(comp);
        expect_op("}");
        return comp;
      }
      return dict_rest(ln, std::move(kv));
    }
    if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
      Node comp = make(NodeKind::SetComp, ln);
      comp.children.push_back(std::move(first));
      comprehension_clauses(comp);
      expect_op("}");
      return comp;
    }
    Node set = make(NodeKind::Set, ln);
    set.children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("}")) break;
      set.children.push_back(star_named_expression());
    }
    expect_op("}");
    return set;
  }

  Node dict_rest(int ln, std::optional<Node> first) {
    Node dict = make(NodeKind::Dict, ln);
    if (first) {
      dict.children.push_back(std::move(*first));
      if (!accept_op(",")) {
        expect_op("}");
        return dict;
      }
    }
    while (!at_op("}")) {
      if (accept_op("**")) {
        Node d = make(NodeKind::DoubleStarred, line());
        d.children.push_back(bitwise_or());
        dict.children.push_back(std::move(d));
      } else {
        Node kv = make(NodeKind::KeyValue, line());
        kv.children.push_back(expression());
        expect_op(":");
        kv.children.push_back(expression());
        dict.children.push_back(std::move(kv));
      }
      if (!accept_op(",")) break;
    }
    expect_op("}");
    return dict;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int functions_ = 0;
  std::vector<int> loops_{0};
};

}  // namespace

Node parse_module(std::string_view source) { return Parser(tokenize(source)).module(); }

}  // namespace socdbg::python
