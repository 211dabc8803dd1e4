#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "artn/dsl/ast.hpp"
#include "artn/dsl/diagnostic.hpp"

namespace artn::dsl {

struct ParseResult {
  Program program;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return !has_errors(diagnostics); }
};

/// Parses callback-script source:
///
///   program  := item* ;
///   item     := "on" ("start"|"step"|"end") block | "at" STRING block ;
///   block    := "{" stmt* "}" ;
///   stmt     := call | "repeat" INT block ;
///   call     := IDENT "(" [literal ("," literal)*] ")" ;
///   literal  := STRING | NUMBER | INT ;
///
/// `//` comments run to end of line; semicolons after calls are optional.
/// Never throws: errors come back as diagnostics sorted by position, with
/// panic-mode recovery at '}' boundaries so one pass reports every
/// recoverable problem.
ParseResult parse(std::string_view source);

/// Canonical source form; parse(pretty_print(p)) is structurally equal to p.
std::string pretty_print(const Program& program);

}  // namespace artn::dsl
