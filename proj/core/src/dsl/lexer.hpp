#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "artn/dsl/ast.hpp"
#include "artn/dsl/diagnostic.hpp"

namespace artn::dsl::detail {

enum class TokenKind {
  LBrace,
  RBrace,
  LParen,
  RParen,
  Comma,
  Semicolon,
  String,
  Int,
  Number,
  Ident,
  KwOn,
  KwAt,
  KwRepeat,
  Eof,
};

struct Token {
  TokenKind kind = TokenKind::Eof;
  std::string text;  // identifier name or decoded string value
  std::int64_t int_value = 0;
  double number_value = 0.0;
  SourcePos pos;
};

std::string describe(const Token& token);

// Lexing never fails; problems are appended to `diagnostics` and the lexer
// produces a best-effort token stream that always ends in Eof.
std::vector<Token> tokenize(std::string_view source, std::vector<Diagnostic>& diagnostics);

}  // namespace artn::dsl::detail
