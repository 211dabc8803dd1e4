#include "artn/dsl/checker.hpp"
#include "artn/dsl/interpreter.hpp"
#include "artn/dsl/parser.hpp"
#include "artn/tracks.hpp"
#include "doctest.h"

using namespace artn;
using namespace artn::dsl;

namespace {

std::vector<std::string> codes(const std::vector<Diagnostic>& ds) {
  std::vector<std::string> out;
  for (const auto& d : ds) out.push_back(d.code);
  return out;
}

const geo::Track& bus() {
  static const geo::Track t = geo::bus_route_track();
  return t;
}

}  // namespace

TEST_CASE("minimal program") {
  const auto r = parse("on start { setColor(\"yellow\") }");
  REQUIRE(r.ok());
  CHECK(r.diagnostics.empty());
  REQUIRE(r.program.on_start);
  REQUIRE(r.program.on_start->body.size() == 1);
  const Call& c = r.program.on_start->body[0].call;
  CHECK(c.name == "setColor");
  REQUIRE(c.args.size() == 1);
  CHECK(std::get<std::string>(c.args[0].value) == "yellow");
  CHECK(c.pos.line == 1);
  CHECK(c.pos.column == 12);
}

TEST_CASE("empty source") {
  for (const char* src : {"", "   \n\t", "// only a comment\n"}) {
    const auto r = parse(src);
    CHECK(r.diagnostics.empty());
    CHECK(r.program.empty());
  }
}

TEST_CASE("unclosed block") {
  const auto r = parse("on start { setColor(\"yellow\") ");
  REQUIRE(r.diagnostics.size() == 1);
  CHECK(r.diagnostics[0].code == "E001");
  CHECK(r.diagnostics[0].line == 1);
  CHECK(format(r.diagnostics[0]).rfind("1:10: error E001", 0) == 0);
}

TEST_CASE("literals and repeat") {
  const auto r = parse(
      "on step {\n"
      "  repeat 2 { flashLights(3); pauseDriving(-1.5) }\n"
      "  setColor(\"a\\\"b\\\\\\n\")\n"
      "}\n");
  REQUIRE(r.ok());
  const auto& body = r.program.on_step->body;
  REQUIRE(body.size() == 2);
  CHECK(body[0].kind == Statement::Kind::Repeat);
  CHECK(body[0].count == 2);
  CHECK(std::get<std::int64_t>(body[0].body[0].call.args[0].value) == 3);
  CHECK(std::get<double>(body[0].body[1].call.args[0].value) == -1.5);
  CHECK(std::get<std::string>(body[1].call.args[0].value) == "a\"b\\\n");
}

TEST_CASE("recovery reports several errors in one pass") {
  const auto r = parse(
      "on start { setColor(\"x\" }\n"
      "on bogus { beepHorn() }\n"
      "on start { beepHorn() }\n"
      "at \"s\" { 1.5x }\n");
  const auto cs = codes(r.diagnostics);
  CHECK(cs.size() >= 3);
  CHECK(std::find(cs.begin(), cs.end(), "E002") != cs.end());
  CHECK(std::find(cs.begin(), cs.end(), "E006") != cs.end());
  for (const auto& d : r.diagnostics) {
    CHECK(d.line >= 1);
    CHECK(d.column >= 1);
  }
}

TEST_CASE("pretty print round trip") {
  const char* src =
      "at \"stop1\" { pauseDriving(2); flashLights(3) loadPassenger() }\n"
      "on end { unloadAllPassengers() }\n"
      "on start { setColor(\"#FFCC00\"); repeat 3 { beepHorn() } pauseDriving(0.25) }\n";
  const auto a = parse(src);
  REQUIRE(a.ok());
  const std::string printed = pretty_print(a.program);
  const auto b = parse(printed);
  REQUIRE(b.ok());
  CHECK(same_structure(a.program, b.program));
  CHECK(pretty_print(b.program) == printed);
}

TEST_CASE("checker") {
  SUBCASE("unknown waypoint") {
    const auto d = check(parse("at \"nowhere\" {}").program, bus());
    CHECK(codes(d)[0] == "E104");
  }
  SUBCASE("type mismatch") {
    const auto d = check(parse("on start { flashLights(\"x\") }").program, bus());
    CHECK(codes(d)[0] == "E103");
  }
  SUBCASE("arity and unknown functions") {
    const auto d = check(parse("on start { beepHorn(1) honk() repeat 0 { } }").program, bus());
    const auto cs = codes(d);
    CHECK(std::find(cs.begin(), cs.end(), "E101") != cs.end());
    CHECK(std::find(cs.begin(), cs.end(), "E102") != cs.end());
    CHECK(std::find(cs.begin(), cs.end(), "E105") != cs.end());
  }
  SUBCASE("integers are accepted where numbers are expected") {
    const auto d = check(parse("on start { pauseDriving(2) }").program, bus());
    CHECK_FALSE(has_errors(d));
  }
  SUBCASE("missing handlers warn") {
    const auto d = check(parse("").program, bus());
    CHECK(d.size() == bus().waypoints().size());
    for (const auto& w : d) CHECK(w.severity == Severity::Warning);
    CHECK_FALSE(has_errors(d));
  }
}

TEST_CASE("library semantics") {
  const auto r = parse(
      "on start { setColor(\"yellow\") repeat 3 { beepHorn() } }\n"
      "at \"stop1\" { pauseDriving(2.0); flashLights(3); loadPassenger() }\n"
      "at \"school\" { unloadAllPassengers() unloadAllPassengers() resumeDriving() }\n");
  REQUIRE(r.ok());
  VehicleEffects fx;
  EffectLog log;
  auto res = dispatch_event(r.program, EventRef::start(), 0, fx, log);
  CHECK(fx.color == "yellow");
  CHECK(fx.horn_beeps == 3);
  CHECK(log.size() == 4);
  CHECK_FALSE(res.pause);

  res = dispatch_event(r.program, EventRef::at("stop1"), 17, fx, log);
  REQUIRE(res.pause);
  CHECK(res.pause->kind == PauseRequest::Kind::Pause);
  CHECK(res.pause->seconds == 2.0);
  CHECK(fx.lights_flashes == 3);
  CHECK(fx.passengers == 1);
  REQUIRE(log.size() == 7);
  for (std::size_t i = 4; i < 7; ++i) CHECK(log[i].t == 17);

  res = dispatch_event(r.program, EventRef::at("school"), 30, fx, log);
  CHECK(fx.passengers == 0);
  CHECK(res.pause->kind == PauseRequest::Kind::Resume);
  CHECK(dispatch_event(r.program, EventRef::end(), 31, fx, log).faults.empty());
}

TEST_CASE("runtime faults abort only the handler") {
  const auto r = parse("on start { beepHorn() setColor(\"mauve\") beepHorn() }\n"
                       "on end { unloadPassenger() }");
  REQUIRE(r.ok());
  VehicleEffects fx;
  EffectLog log;
  auto res = dispatch_event(r.program, EventRef::start(), 0, fx, log);
  REQUIRE(res.faults.size() == 1);
  CHECK(res.faults[0].code == "R001");
  CHECK(fx.horn_beeps == 1);
  CHECK(log.size() == 1);
  res = dispatch_event(r.program, EventRef::end(), 5, fx, log);
  CHECK(res.faults[0].code == "R002");
  CHECK(fx.passengers == 0);
}

TEST_CASE("interpreter is deterministic") {
  const auto r = parse("on step { flashLights(1) repeat 2 { beepHorn() } }");
  EffectLog a, b;
  VehicleEffects fa, fb;
  for (int t = 0; t < 10; ++t) {
    dispatch_event(r.program, EventRef::step(), t, fa, a);
    dispatch_event(r.program, EventRef::step(), t, fb, b);
  }
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(to_json(a[i]) == to_json(b[i]));
  CHECK(to_json(effect_entry_from_json(to_json(a[0]))) == to_json(a[0]));
}

TEST_CASE("colors") {
  CHECK(is_valid_color("yellow"));
  CHECK(is_valid_color("#a0B1c2"));
  CHECK_FALSE(is_valid_color("#a0B1c"));
  CHECK_FALSE(is_valid_color("Yellow"));
  CHECK_FALSE(is_valid_color("#gg0000"));
}

TEST_CASE("event names") {
  for (const EventRef& e : {EventRef::start(), EventRef::step(), EventRef::end(), EventRef::at("x y")}) {
    CHECK(event_from_string(to_string(e)) == e);
  }
}
