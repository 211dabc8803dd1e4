#include "lexer.hpp"

#include <charconv>
#include <cstdlib>

namespace artn::dsl::detail {

namespace {

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
 public:
  Lexer(std::string_view src, std::vector<Diagnostic>& diags) : src_(src), diags_(diags) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_trivia();
      Token tok;
      tok.pos = pos_;
      if (at_end()) {
        tok.kind = TokenKind::Eof;
        out.push_back(std::move(tok));
        return out;
      }
      const char c = peek();
      switch (c) {
        case '{': tok.kind = TokenKind::LBrace; advance(); break;
        case '}': tok.kind = TokenKind::RBrace; advance(); break;
        case '(': tok.kind = TokenKind::LParen; advance(); break;
        case ')': tok.kind = TokenKind::RParen; advance(); break;
        case ',': tok.kind = TokenKind::Comma; advance(); break;
        case ';': tok.kind = TokenKind::Semicolon; advance(); break;
        case '"': lex_string(tok); break;
        default:
          if (is_digit(c) || (c == '-' && is_digit(peek(1)))) {
            lex_number(tok);
          } else if (is_ident_start(c)) {
            lex_ident(tok);
          } else {
            error(pos_, "E004", "unexpected character '" + current_char() + "'");
            advance_char();
            continue;
          }
      }
      out.push_back(std::move(tok));
    }
  }

 private:
  bool at_end() const { return i_ >= src_.size(); }
  char peek(std::size_t ahead = 0) const {
    return i_ + ahead < src_.size() ? src_[i_ + ahead] : '\0';
  }

  // Advances one byte; columns count code points, so UTF-8 continuation
  // bytes do not move the column.
  void advance() {
    const char c = src_[i_++];
    if (c == '\n') {
      ++pos_.line;
      pos_.column = 1;
    } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
      ++pos_.column;
    }
  }

  std::string current_char() const {
    std::size_t len = 1;
    while (i_ + len < src_.size() && (static_cast<unsigned char>(src_[i_ + len]) & 0xC0) == 0x80) {
      ++len;
    }
    return std::string(src_.substr(i_, len));
  }

  void advance_char() {
    advance();
    while (!at_end() && (static_cast<unsigned char>(peek()) & 0xC0) == 0x80) ++i_;
  }

  void skip_trivia() {
    while (!at_end()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        while (!at_end() && peek() != '\n') advance();
      } else {
        break;
      }
    }
  }

  void lex_string(Token& tok) {
    tok.kind = TokenKind::String;
    advance();  // opening quote
    for (;;) {
      if (at_end() || peek() == '\n') {
        error(tok.pos, "E003", "unterminated string literal");
        return;
      }
      const char c = peek();
      if (c == '"') {
        advance();
        return;
      }
      if (c == '\\') {
        const SourcePos esc = pos_;
        advance();
        const char e = peek();
        switch (e) {
          case '"': tok.text += '"'; advance(); break;
          case '\\': tok.text += '\\'; advance(); break;
          case 'n': tok.text += '\n'; advance(); break;
          case 't': tok.text += '\t'; advance(); break;
          default:
            if (at_end() || e == '\n') continue;
            error(esc, "E008", "invalid escape sequence '\\" + current_char() + "'");
            tok.text += current_char();
            advance_char();
        }
        continue;
      }
      tok.text += c;
      advance();
    }
  }

  void lex_number(Token& tok) {
    const std::size_t start = i_;
    if (peek() == '-') advance();
    while (is_digit(peek())) advance();
    bool fractional = false;
    bool malformed = false;
    if (peek() == '.') {
      fractional = true;
      advance();
      if (!is_digit(peek())) malformed = true;
      while (is_digit(peek())) advance();
    }
    // "1.2.3" or "12abc" is one bad token, not a number followed by junk.
    while (is_ident_char(peek()) || peek() == '.') {
      malformed = true;
      advance();
    }
    const std::string_view lexeme = src_.substr(start, i_ - start);
    if (fractional || malformed) {
      tok.kind = TokenKind::Number;
      if (malformed) {
        error(tok.pos, "E007", "malformed number '" + std::string(lexeme) + "'");
        return;
      }
      tok.number_value = std::strtod(std::string(lexeme).c_str(), nullptr);
    } else {
      tok.kind = TokenKind::Int;
      const auto [ptr, ec] =
          std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), tok.int_value);
      if (ec != std::errc() || ptr != lexeme.data() + lexeme.size()) {
        tok.int_value = 0;
        error(tok.pos, "E007", "malformed number '" + std::string(lexeme) + "'");
      }
    }
  }

  void lex_ident(Token& tok) {
    const std::size_t start = i_;
    while (is_ident_char(peek())) advance();
    tok.text = std::string(src_.substr(start, i_ - start));
    if (tok.text == "on") {
      tok.kind = TokenKind::KwOn;
    } else if (tok.text == "at") {
      tok.kind = TokenKind::KwAt;
    } else if (tok.text == "repeat") {
      tok.kind = TokenKind::KwRepeat;
    } else {
      tok.kind = TokenKind::Ident;
    }
  }

  void error(SourcePos at, const char* code, std::string message) {
    diags_.push_back({Severity::Error, at.line, at.column, code, std::move(message)});
  }

  std::string_view src_;
  std::vector<Diagnostic>& diags_;
  std::size_t i_ = 0;
  SourcePos pos_;
};

}  // namespace

std::string describe(const Token& token) {
  switch (token.kind) {
    case TokenKind::LBrace: return "'{'";
    case TokenKind::RBrace: return "'}'";
    case TokenKind::LParen: return "'('";
    case TokenKind::RParen: return "')'";
    case TokenKind::Comma: return "','";
    case TokenKind::Semicolon: return "';'";
    case TokenKind::String: return "string \"" + token.text + "\"";
    case TokenKind::Int: return "integer " + std::to_string(token.int_value);
    case TokenKind::Number: return "number";
    case TokenKind::Ident: return "identifier '" + token.text + "'";
    case TokenKind::KwOn: return "keyword 'on'";
    case TokenKind::KwAt: return "keyword 'at'";
    case TokenKind::KwRepeat: return "keyword 'repeat'";
    case TokenKind::Eof: return "end of input";
  }
  return "token";
}

std::vector<Token> tokenize(std::string_view source, std::vector<Diagnostic>& diagnostics) {
  return Lexer(source, diagnostics).run();
}

}  // namespace artn::dsl::detail
