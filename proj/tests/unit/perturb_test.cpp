#include "doctest.h"

#include "reasonq/corpus.hpp"
#include "reasonq/error.hpp"
#include "support/test_support.hpp"

#include <algorithm>

using namespace reasonq;

namespace {

Corpus two_items() {
  return parse_corpus(R"({"id":"a","prompt":"Tom has 3 apples and buys 2 more. How many now?","gold":"5","task_kind":"numeric"}
{"id":"b","prompt":"Is the sky blue? Answer yes or no.","gold":"yes","task_kind":"boolean"}
)",
                      "two");
}

}  // namespace

TEST_SUITE("perturb") {
  TEST_CASE("digits survive every variant") {
    auto variants = perturb_baseline("Tom has 3 apples and buys 2 more. How many now?", 3, 42);
    REQUIRE(variants.size() == 3);
    for (const auto& v : variants) {
      CHECK(v.text.find('3') != std::string::npos);
      CHECK(v.text.find('2') != std::string::npos);
      CHECK_FALSE(v.degenerate);
      CHECK(v.text != "Tom has 3 apples and buys 2 more. How many now?");
    }
  }

  TEST_CASE("no perturbable site gives degenerate copies") {
    auto variants = perturb_baseline("A.", 3, 42);
    REQUIRE(variants.size() == 3);
    for (const auto& v : variants) {
      CHECK(v.degenerate);
      CHECK(v.text == "A.");
    }
  }

  TEST_CASE("seeded determinism") {
    const char* prompt = "Sara reads 12 pages a day, and she wants to finish a big book. How long will it take?";
    CHECK(perturb_baseline(prompt, 6, 42) == perturb_baseline(prompt, 6, 42));
  }

  TEST_CASE("option letters are kept") {
    auto variants = perturb_baseline("Which is largest? (A) 4 (B) 9 (C) 2. Pick one.", 3, 1);
    for (const auto& v : variants) {
      for (const char* tok : {"(A)", "(B)", "(C)"}) CHECK(v.text.find(tok) != std::string::npos);
    }
  }

  TEST_CASE("variant file covering every id") {
    rqtest::TempDir dir;
    rqtest::write_text(dir / "v.jsonl", R"({"id":"a","variants":["x 3 2","y 3 2","z 3 2"]}
{"id":"b","variants":["sky blue?","is it blue?","blue sky?"]}
)");
    auto c = attach_perturbations(two_items(), VariantFileSource{dir / "v.jsonl"});
    CHECK(c.p_count == 3);
    CHECK(c.perturbation_source == "file:v.jsonl");
    CHECK(c.instances[1].perturbations[2] == "blue sky?");
  }

  TEST_CASE("variant file missing an id") {
    rqtest::TempDir dir;
    rqtest::write_text(dir / "v.jsonl", R"({"id":"a","variants":["x","y","z"]})");
    try {
      attach_perturbations(two_items(), VariantFileSource{dir / "v.jsonl"});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Validation);
      CHECK(std::string(e.what()).find("b") != std::string::npos);
    }
  }

  TEST_CASE("baseline source equals item-wise baseline calls") {
    auto c = attach_perturbations(two_items(), BaselineSource{3, 42});
    CHECK(c.p_count == 3);
    for (const auto& inst : c.instances) {
      auto direct = perturb_baseline(inst.prompt, 3, 42);
      REQUIRE(inst.perturbations.size() == 3);
      for (std::size_t j = 0; j < 3; ++j) CHECK(inst.perturbations[j] == direct[j].text);
    }
  }

  TEST_CASE("baseline source uses shipped paraphrases first") {
    auto c = generate_synthetic({42, 0, 0, 5});
    auto with = attach_perturbations(c, BaselineSource{3, 42});
    for (std::size_t i = 0; i < c.instances.size(); ++i) {
      const auto& own = c.instances[i].paraphrases;
      const auto& got = with.instances[i].perturbations;
      REQUIRE(got.size() == 3);
      for (std::size_t j = 0; j < std::min<std::size_t>(own.size(), 3); ++j) CHECK(got[j] == own[j]);
    }
  }
}
