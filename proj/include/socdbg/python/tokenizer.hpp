#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "socdbg/python/ast.hpp"

namespace socdbg::python {

enum class TokenKind { Name, Number, String, Op, Newline, Indent, Dedent, End };

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;
  int line = 0;
  int column = 0;
};

/// Splits Python 3 source into tokens, synthesising NEWLINE/INDENT/DEDENT the
/// way the reference tokenizer does. Comments and blank lines are dropped.
/// Throws SyntaxError on unterminated strings, bad dedents, stray characters
/// and unbalanced brackets.
std::vector<Token> tokenize(std::string_view source);

}  // namespace socdbg::python
