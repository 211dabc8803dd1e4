#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace artn::dsl {

enum class Severity { Error, Warning };

// Codes:
//   E001 unclosed block            E101 unknown function
//   E002 unexpected token          E102 wrong argument count
//   E003 unterminated string       E103 argument type mismatch
//   E004 unexpected character      E104 unknown waypoint
//   E005 duplicate handler         E105 non-positive repeat count
//   E006 unknown event             W201 waypoint without handler
//   E007 malformed number          R001 invalid color
//   E008 invalid escape sequence   R002 no passengers to unload
//                                  R003 argument out of range
struct Diagnostic {
  Severity severity = Severity::Error;
  int line = 1;
  int column = 1;
  std::string code;
  std::string message;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

// "3:7: error E002: expected '{', found identifier 'foo'"
std::string format(const Diagnostic& d);
std::string format(const std::vector<Diagnostic>& ds);

bool has_errors(const std::vector<Diagnostic>& ds);

nlohmann::json to_json(const Diagnostic& d);
nlohmann::json to_json(const std::vector<Diagnostic>& ds);

}  // namespace artn::dsl
