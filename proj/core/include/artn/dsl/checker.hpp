#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "artn/dsl/ast.hpp"
#include "artn/dsl/diagnostic.hpp"
#include "artn/geometry.hpp"

namespace artn::dsl {

enum class ParamType { String, Integer, Number };

struct FunctionSignature {
  std::string_view name;
  std::vector<ParamType> params;
  std::string_view summary;
};

// The vehicle function library available inside handlers.
std::span<const FunctionSignature> function_library();
const FunctionSignature* find_function(std::string_view name);

/// Static validation against the function library and the track's waypoints:
/// unknown functions, arity and type mismatches, unknown waypoints and
/// non-positive repeat counts are errors; track waypoints without a handler
/// are warnings.
std::vector<Diagnostic> check(const Program& program, const geo::Track& track);

}  // namespace artn::dsl
