#include <cstdlib>
#include <fstream>
#include <set>

#include "../support/dsl_golden.hpp"
#include "doctest.h"

using namespace artn;

namespace {

const std::filesystem::path kCorpus = ARTN_TEST_DATA_DIR "/dsl";

std::string golden_path(const std::filesystem::path& wps) {
  auto p = wps;
  return p.replace_extension(".golden").string();
}

}  // namespace

TEST_CASE("corpus reports match their goldens") {
  const bool record = std::getenv("ARTN_RECORD_DSL") != nullptr;
  const auto files = testing::corpus_files(kCorpus);
  REQUIRE(files.size() >= 20);
  for (const auto& f : files) {
    CAPTURE(f.filename().string());
    const std::string report = testing::dsl_golden_report(testing::read_text_file(f));
    if (record) {
      std::ofstream(golden_path(f), std::ios::binary) << report;
      continue;
    }
    CHECK(report == testing::read_text_file(golden_path(f)));
    CHECK(report.find("UNSTABLE") == std::string::npos);
  }
}

TEST_CASE("corpus covers every diagnostic code") {
  std::set<std::string> seen;
  for (const auto& f : testing::corpus_files(kCorpus)) {
    const std::string golden = testing::read_text_file(golden_path(f));
    for (std::size_t at = golden.find(" E"); at != std::string::npos; at = golden.find(" E", at + 1)) {
      seen.insert(golden.substr(at + 1, 4));
    }
    for (const char* prefix : {" W", " R"}) {
      for (std::size_t at = golden.find(prefix); at != std::string::npos; at = golden.find(prefix, at + 1)) {
        seen.insert(golden.substr(at + 1, 4));
      }
    }
  }
  for (const char* code : {"E001", "E002", "E003", "E004", "E005", "E006", "E007", "E008", "E101", "E102", "E103",
                           "E104", "E105", "W201", "R001", "R002", "R003"}) {
    CAPTURE(code);
    CHECK(seen.count(code) == 1);
  }
}
