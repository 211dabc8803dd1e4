#include "artn/dsl/parser.hpp"

#include <algorithm>
#include <charconv>
#include <optional>

#include "lexer.hpp"

namespace artn::dsl {

using detail::Token;
using detail::TokenKind;

namespace {

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::vector<Diagnostic>& diags)
      : toks_(std::move(tokens)), diags_(diags) {}

  Program run() {
    Program program;
    while (!check(TokenKind::Eof)) {
      if (check(TokenKind::KwOn)) {
        parse_on(program);
      } else if (check(TokenKind::KwAt)) {
        parse_at(program);
      } else {
        error(cur(), "E002", "expected 'on' or 'at', found " + describe(cur()));
        recover_top();
      }
    }
    return program;
  }

 private:
  const Token& cur() const { return toks_[i_]; }
  bool check(TokenKind k) const { return cur().kind == k; }
  const Token& take() {
    const Token& t = toks_[i_];
    if (t.kind != TokenKind::Eof) ++i_;
    return t;
  }

  void error(const Token& at, const char* code, std::string msg) {
    error(at.pos, code, std::move(msg));
  }
  void error(SourcePos at, const char* code, std::string msg) {
    diags_.push_back({Severity::Error, at.line, at.column, code, std::move(msg)});
  }

  // Top level: skip to just past the next '}' that closes a brace group
  // opened during the skip (or a stray '}'), or to the next item keyword.
  void recover_top() {
    int depth = 0;
    bool first = true;
    while (!check(TokenKind::Eof)) {
      const TokenKind k = cur().kind;
      if (!first && depth == 0 && (k == TokenKind::KwOn || k == TokenKind::KwAt)) return;
      first = false;
      take();
      if (k == TokenKind::LBrace) {
        ++depth;
      } else if (k == TokenKind::RBrace) {
        if (depth <= 1) return;
        --depth;
      }
    }
  }

  // Inside a block: skip to the '}' closing the current block (not consumed).
  void recover_block() {
    int depth = 0;
    while (!check(TokenKind::Eof)) {
      const TokenKind k = cur().kind;
      if (k == TokenKind::RBrace) {
        if (depth == 0) return;
        --depth;
      } else if (k == TokenKind::LBrace) {
        ++depth;
      }
      take();
    }
  }

  void parse_on(Program& program) {
    const Token& kw = take();
    if (!check(TokenKind::Ident)) {
      error(cur(), "E002", "expected event name after 'on', found " + describe(cur()));
      recover_top();
      return;
    }
    const Token& name = take();
    std::optional<Handler>* slot = nullptr;
    if (name.text == "start") {
      slot = &program.on_start;
    } else if (name.text == "step") {
      slot = &program.on_step;
    } else if (name.text == "end") {
      slot = &program.on_end;
    } else {
      error(name, "E006", "unknown event '" + name.text + "' (expected start, step or end)");
    }
    std::optional<Handler> handler = parse_handler(kw.pos);
    if (!slot || !handler) return;
    if (slot->has_value()) {
      error(kw, "E005", "duplicate 'on " + name.text + "' handler");
      return;
    }
    *slot = std::move(handler);
  }

  void parse_at(Program& program) {
    const Token& kw = take();
    if (!check(TokenKind::String)) {
      error(cur(), "E002", "expected waypoint name string after 'at', found " + describe(cur()));
      recover_top();
      return;
    }
    const Token& name = take();
    std::optional<Handler> handler = parse_handler(kw.pos);
    if (!handler) return;
    if (program.find_waypoint(name.text)) {
      error(kw, "E005", "duplicate handler for waypoint \"" + name.text + "\"");
      return;
    }
    program.waypoints.push_back({name.text, name.pos, std::move(*handler)});
  }

  std::optional<Handler> parse_handler(SourcePos pos) {
    if (!check(TokenKind::LBrace)) {
      error(cur(), "E002", "expected '{', found " + describe(cur()));
      recover_top();
      return std::nullopt;
    }
    Handler h;
    h.pos = pos;
    if (!parse_block(h.body)) return std::nullopt;
    return h;
  }

  // Returns false when the input ended before the closing brace.
  bool parse_block(std::vector<Statement>& body) {
    const Token& open = take();
    for (;;) {
      if (check(TokenKind::RBrace)) {
        take();
        return true;
      }
      if (check(TokenKind::Eof)) {
        error(open, "E001", "unclosed block");
        return false;
      }
      if (!parse_statement(body)) return false;
    }
  }

  // Returns false only on end of input inside a nested block.
  bool parse_statement(std::vector<Statement>& body) {
    if (check(TokenKind::Ident)) {
      Statement st;
      st.kind = Statement::Kind::Call;
      st.pos = cur().pos;
      if (parse_call(st.call)) {
        body.push_back(std::move(st));
        if (check(TokenKind::Semicolon)) take();
      } else {
        recover_block();
      }
      return true;
    }
    if (check(TokenKind::KwRepeat)) {
      Statement st;
      st.kind = Statement::Kind::Repeat;
      st.pos = take().pos;
      if (!check(TokenKind::Int)) {
        error(cur(), "E002", "expected integer repeat count, found " + describe(cur()));
        recover_block();
        return true;
      }
      st.count = take().int_value;
      if (!check(TokenKind::LBrace)) {
        error(cur(), "E002", "expected '{', found " + describe(cur()));
        recover_block();
        return true;
      }
      if (!parse_block(st.body)) return false;
      body.push_back(std::move(st));
      return true;
    }
    error(cur(), "E002", "expected statement, found " + describe(cur()));
    recover_block();
    return true;
  }

  bool parse_call(Call& call) {
    const Token& name = take();
    call.name = name.text;
    call.pos = name.pos;
    if (!check(TokenKind::LParen)) {
      error(cur(), "E002", "expected '(' after '" + call.name + "', found " + describe(cur()));
      return false;
    }
    take();
    if (check(TokenKind::RParen)) {
      take();
      return true;
    }
    for (;;) {
      Literal lit;
      lit.pos = cur().pos;
      switch (cur().kind) {
        case TokenKind::String: lit.value = cur().text; break;
        case TokenKind::Int: lit.value = cur().int_value; break;
        case TokenKind::Number: lit.value = cur().number_value; break;
        default:
          error(cur(), "E002", "expected literal, found " + describe(cur()));
          return false;
      }
      take();
      call.args.push_back(std::move(lit));
      if (check(TokenKind::Comma)) {
        take();
        continue;
      }
      if (check(TokenKind::RParen)) {
        take();
        return true;
      }
      error(cur(), "E002", "expected ',' or ')', found " + describe(cur()));
      return false;
    }
  }

  std::vector<Token> toks_;
  std::vector<Diagnostic>& diags_;
  std::size_t i_ = 0;
};

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

std::string number_text(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  std::string s(buf, ec == std::errc() ? ptr : buf);
  if (s.find('.') == std::string::npos) s += ".0";
  return s;
}

std::string literal_text(const Literal& lit) {
  if (const auto* s = std::get_if<std::string>(&lit.value)) return quote(*s);
  if (const auto* i = std::get_if<std::int64_t>(&lit.value)) return std::to_string(*i);
  return number_text(std::get<double>(lit.value));
}

void print_block(std::string& out, const std::vector<Statement>& body, int indent) {
  out += "{\n";
  const std::string pad(static_cast<std::size_t>(indent + 1) * 2, ' ');
  for (const Statement& st : body) {
    out += pad;
    if (st.kind == Statement::Kind::Call) {
      out += st.call.name + "(";
      for (std::size_t i = 0; i < st.call.args.size(); ++i) {
        if (i) out += ", ";
        out += literal_text(st.call.args[i]);
      }
      out += ")\n";
    } else {
      out += "repeat " + std::to_string(st.count) + " ";
      print_block(out, st.body, indent + 1);
    }
  }
  out += std::string(static_cast<std::size_t>(indent) * 2, ' ') + "}\n";
}

}  // namespace

ParseResult parse(std::string_view source) {
  ParseResult result;
  std::vector<Token> tokens = detail::tokenize(source, result.diagnostics);
  result.program = Parser(std::move(tokens), result.diagnostics).run();
  std::stable_sort(result.diagnostics.begin(), result.diagnostics.end(),
                   [](const Diagnostic& a, const Diagnostic& b) {
                     return std::tie(a.line, a.column) < std::tie(b.line, b.column);
                   });
  return result;
}

std::string pretty_print(const Program& program) {
  std::string out;
  auto item = [&](const std::string& head, const Handler& h) {
    if (!out.empty()) out += "\n";
    out += head + " ";
    print_block(out, h.body, 0);
  };
  if (program.on_start) item("on start", *program.on_start);
  if (program.on_step) item("on step", *program.on_step);
  if (program.on_end) item("on end", *program.on_end);
  for (const auto& wp : program.waypoints) item("at " + quote(wp.waypoint), wp.handler);
  return out;
}

}  // namespace artn::dsl
