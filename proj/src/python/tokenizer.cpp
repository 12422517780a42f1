#include "socdbg/python/tokenizer.hpp"

#include <array>
#include <cctype>

namespace socdbg::python {
namespace {

constexpr std::array<std::string_view, 23> kMultiCharOps = {
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=",
    ">=",  "==",  "!=",  "+=",  "-=",  "*=", "/=", "%=", "&=", "|=", "^="};
constexpr std::string_view kSingleCharOps = "+-*/%@&|^~<>()[]{},:;.=";

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    indents_.push_back(0);
    while (pos_ < src_.size()) {
      if (at_line_start_ && depth_ == 0) {
        if (!handle_indentation()) continue;
      }
      lex_one();
    }
    if (depth_ > 0) throw SyntaxError("unexpected EOF: '" + std::string(1, brackets_.back()) + "' was never closed", bracket_lines_.back());
    // Tokens synthesised at EOF report the last line that had content.
    const int last = tokens_.empty() ? 1 : tokens_.back().line;
    if (!tokens_.empty() && tokens_.back().kind != TokenKind::Newline &&
        tokens_.back().kind != TokenKind::Dedent && tokens_.back().kind != TokenKind::Indent) {
      push(TokenKind::Newline, "", last, col());
    }
    while (indents_.size() > 1) {
      indents_.pop_back();
      push(TokenKind::Dedent, "", last, 0);
    }
    push(TokenKind::End, "", last, 0);
    return std::move(tokens_);
  }

 private:
  int col() const { return static_cast<int>(pos_ - line_begin_); }

  void push(TokenKind kind, std::string text, int line, int column) {
    tokens_.push_back({kind, std::move(text), line, column});
  }

  void newline_advance() {
    ++pos_;
    ++line_;
    line_begin_ = pos_;
  }

  // Returns false when the line was blank/comment-only and has been consumed.
  bool handle_indentation() {
    int width = 0;
    std::size_t p = pos_;
    while (p < src_.size() && (src_[p] == ' ' || src_[p] == '\t' || src_[p] == '\f')) {
      if (src_[p] == '\t') width = (width / 8 + 1) * 8;
      else if (src_[p] == ' ') ++width;
      ++p;
    }
    if (p >= src_.size()) {
      pos_ = p;
      return false;
    }
    if (src_[p] == '#' || src_[p] == '\n' || src_[p] == '\r' || src_[p] == '\\') {
      if (src_[p] == '\\') {
        // Continuation at the start of a line joins with the next one.
        pos_ = p;
        at_line_start_ = false;
        return true;
      }
      while (p < src_.size() && src_[p] != '\n') ++p;
      pos_ = p;
      if (pos_ < src_.size()) newline_advance();
      return false;
    }
    pos_ = p;
    at_line_start_ = false;
    if (width > indents_.back()) {
      indents_.push_back(width);
      push(TokenKind::Indent, "", line_, 0);
    } else {
      while (width < indents_.back()) {
        indents_.pop_back();
        push(TokenKind::Dedent, "", line_, 0);
      }
      if (width != indents_.back()) {
        throw SyntaxError("unindent does not match any outer indentation level", line_);
      }
    }
    return true;
  }

  void lex_one() {
    const char c = src_[pos_];
    if (c == ' ' || c == '\t' || c == '\f' || c == '\r') {
      ++pos_;
      return;
    }
    if (c == '#') {
      while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      return;
    }
    if (c == '\n') {
      if (depth_ == 0) {
        push(TokenKind::Newline, "", line_, col());
        at_line_start_ = true;
      }
      newline_advance();
      return;
    }
    if (c == '\\') {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && src_[p] == '\r') ++p;
      if (p < src_.size() && src_[p] == '\n') {
        pos_ = p;
        newline_advance();
        return;
      }
      throw SyntaxError("unexpected character after line continuation character", line_);
    }
    if (ident_start(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < src_.size() && ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      std::string_view word = src_.substr(start, pos_ - start);
      if (pos_ < src_.size() && (src_[pos_] == '\'' || src_[pos_] == '"') && is_string_prefix(word)) {
        pos_ = start;
        lex_string(word.size());
        return;
      }
      push(TokenKind::Name, std::string(word), line_, static_cast<int>(start - line_begin_));
      return;
    }
    if (c == '\'' || c == '"') {
      lex_string(0);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      lex_number();
      return;
    }
    for (auto op : kMultiCharOps) {
      if (src_.substr(pos_, op.size()) == op) {
        push(TokenKind::Op, std::string(op), line_, col());
        pos_ += op.size();
        return;
      }
    }
    if (kSingleCharOps.find(c) != std::string_view::npos) {
      if (c == '(' || c == '[' || c == '{') {
        ++depth_;
        brackets_.push_back(c);
        bracket_lines_.push_back(line_);
      } else if (c == ')' || c == ']' || c == '}') {
        const char open = c == ')' ? '(' : c == ']' ? '[' : '{';
        if (depth_ == 0) throw SyntaxError("unmatched '" + std::string(1, c) + "'", line_);
        if (brackets_.back() != open) {
          throw SyntaxError("closing parenthesis '" + std::string(1, c) + "' does not match opening parenthesis '" +
                                std::string(1, brackets_.back()) + "'",
                            line_);
        }
        --depth_;
        brackets_.pop_back();
        bracket_lines_.pop_back();
      }
      push(TokenKind::Op, std::string(1, c), line_, col());
      ++pos_;
      return;
    }
    throw SyntaxError("invalid character '" + std::string(1, c) + "'", line_);
  }

  static bool is_string_prefix(std::string_view w) {
    if (w.size() > 2) return false;
    std::string lower;
    for (char ch : w) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return lower == "r" || lower == "u" || lower == "f" || lower == "b" || lower == "br" ||
           lower == "rb" || lower == "fr" || lower == "rf";
  }

  void lex_string(std::size_t prefix_len) {
    const std::size_t start = pos_;
    const int start_line = line_;
    const int start_col = col();
    pos_ += prefix_len;
    const char quote = src_[pos_];
    const bool triple = src_.substr(pos_, 3) == std::string_view(std::string(3, quote));
    pos_ += triple ? 3 : 1;
    for (;;) {
      if (pos_ >= src_.size()) {
        throw SyntaxError(triple ? "unterminated triple-quoted string literal" : "unterminated string literal",
                          start_line);
      }
      const char ch = src_[pos_];
      if (ch == '\\') {
        pos_ += 1;
        if (pos_ < src_.size()) {
          if (src_[pos_] == '\n') newline_advance();
          else ++pos_;
        }
        continue;
      }
      if (ch == '\n') {
        if (!triple) throw SyntaxError("unterminated string literal", start_line);
        newline_advance();
        continue;
      }
      if (ch == quote) {
        if (!triple) {
          ++pos_;
          break;
        }
        if (src_.substr(pos_, 3) == std::string_view(std::string(3, quote))) {
          pos_ += 3;
          break;
        }
      }
      ++pos_;
    }
    push(TokenKind::String, std::string(src_.substr(start, pos_ - start)), start_line, start_col);
  }

  void lex_number() {
    const std::size_t start = pos_;
    auto digits = [&](auto pred) {
      while (pos_ < src_.size() && (pred(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    };
    auto is_dec = [](unsigned char ch) { return std::isdigit(ch) != 0; };
    if (src_[pos_] == '0' && pos_ + 1 < src_.size() &&
        std::string_view("xXoObB").find(src_[pos_ + 1]) != std::string_view::npos) {
      pos_ += 2;
      digits([](unsigned char ch) { return std::isxdigit(ch) != 0; });
    } else {
      digits(is_dec);
      if (pos_ < src_.size() && src_[pos_] == '.') {
        ++pos_;
        digits(is_dec);
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        std::size_t p = pos_ + 1;
        if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
        if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
          pos_ = p;
          digits(is_dec);
        }
      }
      if (pos_ < src_.size() && (src_[pos_] == 'j' || src_[pos_] == 'J')) ++pos_;
    }
    if (pos_ < src_.size() && ident_char(static_cast<unsigned char>(src_[pos_]))) {
      throw SyntaxError("invalid decimal literal", line_);
    }
    push(TokenKind::Number, std::string(src_.substr(start, pos_ - start)), line_,
         static_cast<int>(start - line_begin_));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_begin_ = 0;
  int line_ = 1;
  int depth_ = 0;
  bool at_line_start_ = true;
  std::vector<int> indents_;
  std::vector<char> brackets_;
  std::vector<int> bracket_lines_;
  std::vector<Token> tokens_;
};

}  // namespace

std::vector<Token> tokenize(std::string_view source) { return Lexer(source).run(); }

}  // namespace socdbg::python
