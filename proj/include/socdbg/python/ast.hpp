#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "socdbg/error.hpp"

namespace socdbg::python {

/// Raised for source that is not valid Python 3. `line()` is 1-based.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, int line)
      : Error("SyntaxError on line " + std::to_string(line) + ": " + message), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

enum class NodeKind {
  Module,
  Block,  // statement list; `op` is "else"/"finally" for those clauses of try
  FunctionDef,
  ClassDef,
  Decorator,
  Arguments,
  Arg,
  Return,
  Delete,
  Assign,
  AugAssign,
  AnnAssign,
  For,
  While,
  If,  // `op` is "elif" when the node is the elif branch of an enclosing If
  With,
  WithItem,
  Raise,
  Try,
  ExceptHandler,
  Assert,
  Import,
  ImportFrom,
  Alias,
  Global,
  Nonlocal,
  ExprStmt,
  Pass,
  Break,
  Continue,
  BoolOp,
  NamedExpr,
  BinOp,
  UnaryOp,
  Lambda,
  IfExp,
  Dict,
  KeyValue,
  Set,
  ListComp,
  SetComp,
  DictComp,
  GeneratorExp,
  Comprehension,
  Await,
  Yield,
  YieldFrom,
  Compare,
  Call,
  Keyword,
  Attribute,
  Subscript,
  Starred,
  DoubleStarred,
  Name,
  Constant,
  List,
  Tuple,
  Slice,
  Empty,  // placeholder for an omitted optional part (slice bounds)
};

std::string_view to_string(NodeKind kind);

/// Untyped syntax tree node. Child layout per kind:
///
///   FunctionDef  name; [Arguments, Block body, Decorator...]; op "async" for async def
///   ClassDef     name; [Block body, base/keyword expressions..., Decorator...]
///   Arg          name; op "", "*" or "**"; [default?]
///   Assign       [targets..., value]
///   AugAssign    op; [target, value]
///   AnnAssign    [target, annotation, value?]
///   For          [target, iter, Block body, Block orelse?]
///   While        [test, Block body, Block orelse?]
///   If           [test, Block body, (If elif | Block else)?]
///   Try          [Block body, ExceptHandler..., Block "else"?, Block "finally"?]
///   ExceptHandler name (as-target); [type?, Block]
///   With         [WithItem..., Block]; WithItem [context, target?]
///   BinOp        op; [left, right]      UnaryOp op; [operand]
///   BoolOp       op; [operands...]      Compare ops; [left, comparators...]
///   Call         [func, args...]        Keyword name; [value]
///   Attribute    name; [value]          Subscript [value, index]
///   Slice        [lower, upper, step] (Empty when omitted)
///   Constant     op in {int, float, complex, str, bytes, fstring, bool, none, ellipsis}; name = text
///   *Comp/GeneratorExp [element (KeyValue for dicts), Comprehension...]
///   Comprehension [target, iter, conditions...]
struct Node {
  NodeKind kind = NodeKind::Empty;
  std::string name;
  std::string op;
  std::vector<std::string> ops;
  int line = 0;
  bool parenthesized = false;
  std::vector<Node> children;

  bool is(NodeKind k) const noexcept { return kind == k; }
};

/// Parses a complete module. Throws SyntaxError.
Node parse_module(std::string_view source);

/// Pre-order traversal. Returning false from `visit` skips the node's children.
void walk(const Node& root, const std::function<bool(const Node&)>& visit);

}  // namespace socdbg::python
