#include "doctest.h"

#include "reasonq/error.hpp"
#include "reasonq/kvconfig.hpp"

using namespace reasonq;

TEST_SUITE("kvconfig") {
  TEST_CASE("scalars, quoted strings, lists and sections") {
    auto cfg = KvConfig::parse(R"(
# leading comment
k = 3
temperature = 0.7   # trailing
name = "two words \"quoted\""
models = [a, "b c", 3]

[scorer]
mode = baseline
)");
    CHECK(cfg.get_int("k") == 3);
    CHECK(cfg.get_double("temperature") == doctest::Approx(0.7));
    CHECK(cfg.get_string("name") == "two words \"quoted\"");
    auto models = cfg.get_list("models");
    REQUIRE(models);
    CHECK(*models == std::vector<std::string>{"a", "b c", "3"});
    CHECK(cfg.get_string("scorer.mode") == "baseline");
    CHECK_FALSE(cfg.has("missing"));
    CHECK(cfg.get_string("missing") == std::nullopt);
  }

  TEST_CASE("a scalar reads as a one-item list") {
    auto cfg = KvConfig::parse("corpus = a.jsonl\n");
    CHECK(cfg.get_list("corpus") == std::vector<std::string>{"a.jsonl"});
  }

  TEST_CASE("redefinition and malformed lines are errors") {
    CHECK_THROWS_AS(KvConfig::parse("a = 1\na = 2\n"), Error);
    CHECK_THROWS_AS(KvConfig::parse("no equals sign\n"), Error);
    CHECK_THROWS_AS(KvConfig::parse("bad key! = 1\n"), Error);
    CHECK_THROWS_AS(KvConfig::parse("s = \"unterminated\n"), Error);
  }

  TEST_CASE("type mismatches are reported") {
    auto cfg = KvConfig::parse("k = three\n");
    CHECK_THROWS_AS(cfg.get_int("k"), Error);
    CHECK_THROWS_AS(cfg.get_double("k"), Error);
  }

  TEST_CASE("missing file is a config error") {
    try {
      KvConfig::load("/nonexistent/reasonq.conf");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
    }
  }
}
