#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "qs/error.hpp"

namespace qs::detail {

struct Token {
  enum class Kind { kIdent, kInt, kPunct, kEof };
  Kind kind = Kind::kEof;
  std::string text;
  int line = 1;
  int column = 1;
};

// Identifiers, signed integers and single-character punctuation; `#` starts
// a comment that runs to end of line.
inline std::vector<Token> tokenize(std::string_view src, std::string_view punct) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    std::size_t j = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) {
        ++j;
      }
      t.kind = Token::Kind::kIdent;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '-' && i + 1 < src.size() &&
                std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      ++j;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      t.kind = Token::Kind::kInt;
    } else if (punct.find(c) != std::string_view::npos) {
      j = i + 1;
      t.kind = Token::Kind::kPunct;
    } else {
      throw ParseError(line, col, std::string("unexpected character '") + c + "'");
    }
    t.text = std::string(src.substr(i, j - i));
    advance(j - i);
    out.push_back(std::move(t));
  }
  Token eof;
  eof.line = line;
  eof.column = col;
  out.push_back(eof);
  return out;
}

class TokenStream {
 public:
  explicit TokenStream(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  const Token& next() {
    const Token& t = tokens_[pos_];
    if (pos_ + 1 < tokens_.size()) ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == Token::Kind::kEof; }

  bool is_punct(char c, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == Token::Kind::kPunct && t.text[0] == c;
  }
  bool is_word(std::string_view w, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == Token::Kind::kIdent && t.text == w;
  }

  [[noreturn]] void fail(const Token& at, const std::string& what) const {
    throw ParseError(at.line, at.column, what);
  }

  const Token& expect_punct(char c) {
    if (!is_punct(c)) fail(peek(), std::string("expected '") + c + "'" + found());
    return next();
  }
  const Token& expect_word(std::string_view w) {
    if (!is_word(w)) fail(peek(), "expected '" + std::string(w) + "'" + found());
    return next();
  }
  const Token& expect_ident(std::string_view what) {
    if (peek().kind != Token::Kind::kIdent) {
      fail(peek(), "expected " + std::string(what) + found());
    }
    return next();
  }
  long expect_int(std::string_view what) {
    if (peek().kind != Token::Kind::kInt) fail(peek(), "expected " + std::string(what) + found());
    return std::stol(next().text);
  }

 private:
  std::string found() const {
    const Token& t = peek();
    if (t.kind == Token::Kind::kEof) return ", found end of input";
    return ", found '" + t.text + "'";
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace qs::detail
