#include <doctest.h>

#include "persrep/captions.hpp"
#include "persrep/errors.hpp"
#include "test_helpers.hpp"

using namespace persrep;

TEST_CASE("strip_identifier drops the identifier noun phrase") {
  CHECK(strip_identifier("A <new1> mug on a wooden desk", "mug") == "A wooden desk");
  CHECK(strip_identifier("A <new1> mug in a cozy living room", "mug") == "A cozy living room");
  CHECK(strip_identifier("A <new1> dog in the snow", "dog") == "The snow");
  CHECK(strip_identifier("A <new1> shirt on a clothesline", "shirt") == "A clothesline");
}

TEST_CASE("strip_identifier requires the token") {
  try {
    strip_identifier("a mug on a desk", "mug");
    FAIL("expected MissingIdentifierToken");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingIdentifierToken);
  }
}

TEST_CASE("strip_identifier rejects templates that strip to nothing") {
  try {
    strip_identifier("<new1>", "mug");
    FAIL("expected MalformedTemplate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedTemplate);
  }
  try {
    strip_identifier("a <new1> mug", "mug");  // only the noun phrase itself
    FAIL("expected MalformedTemplate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedTemplate);
  }
}

TEST_CASE("corpus override wins over the mechanical rule") {
  CaptionCorpus corpus;
  corpus.entries.push_back({"photo of a <new1> at the beach", "dog"});
  corpus.background_overrides["photo of a <new1> at the beach"] = "photo of a beach";
  corpus.validate();
  CHECK(corpus.background_for(corpus.entries[0]) == "photo of a beach");
}

TEST_CASE("corpus validation demands exactly one token") {
  CaptionCorpus twice;
  twice.entries.push_back({"A <new1> dog at the <new1> dog park", "dog"});
  try {
    twice.validate();
    FAIL("expected MalformedTemplate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedTemplate);
  }

  CaptionCorpus zero;
  zero.entries.push_back({"A dog at the park", "dog"});
  CHECK_THROWS_AS(zero.validate(), Error);
}

TEST_CASE("builtin corpora validate and produce backgrounds for every entry") {
  for (const char* name : {"pods", "df2", "dogs", "toy"}) {
    CaptionCorpus corpus = builtin_corpus(name);
    CHECK(!corpus.entries.empty());
    for (const auto& entry : corpus.entries) {
      std::string background = corpus.background_for(entry);
      CHECK(!background.empty());
      CHECK(background.find(kIdentifierToken) == std::string::npos);
    }
  }
}

TEST_CASE("df2 wearing-templates use curated person backgrounds") {
  CaptionCorpus corpus = builtin_corpus("df2");
  bool found = false;
  for (const auto& entry : corpus.entries) {
    if (entry.template_text == "A person wearing a <new1> shirt at a park") {
      CHECK(corpus.background_for(entry) == "A person at a park");
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("expected backgrounds for the full shipped corpora") {
  // Hand-written expected-output fixture covering every shipped template.
  const std::vector<std::pair<std::string, std::string>> expected = {
      {"A <new1> mug on a wooden desk", "A wooden desk"},
      {"A <new1> mug in a cozy living room", "A cozy living room"},
      {"A <new1> mug on a windowsill", "A windowsill"},
      {"A <new1> bottle on a picnic table", "A picnic table"},
      {"A <new1> bottle in a backpack pocket", "A backpack pocket"},
      {"A <new1> bottle on a yoga mat", "A yoga mat"},
      {"A <new1> screwdriver in a toolbox", "A toolbox"},
      {"A <new1> screwdriver on a wooden workbench", "A wooden workbench"},
      {"A <new1> screwdriver in a carpenter's tool belt", "A carpenter's tool belt"},
      {"A <new1> bag in a car trunk", "A car trunk"},
      {"A <new1> bag on a park bench", "A park bench"},
      {"A <new1> bag in a shopping cart", "A shopping cart"},
      {"A <new1> bag on a library shelf", "A library shelf"},
      {"A <new1> bag in a gym locker", "A gym locker"},
      {"A <new1> bag on a wooden table", "A wooden table"},
      {"A <new1> shoe in the rain", "The rain"},
      {"A <new1> shoe on a sandy beach", "A sandy beach"},
      {"A <new1> shoe in a gym locker", "A gym locker"},
  };
  CaptionCorpus pods = builtin_corpus("pods");
  REQUIRE(pods.entries.size() == expected.size());
  for (size_t i = 0; i < expected.size(); ++i) {
    CHECK(pods.entries[i].template_text == expected[i].first);
    CHECK(pods.background_for(pods.entries[i]) == expected[i].second);
  }
}

TEST_CASE("corpus json round-trip") {
  testutil::TempDir tmp("corpus");
  CaptionCorpus corpus = builtin_corpus("dogs");
  save_corpus(corpus, tmp.path / "corpus.json");
  CaptionCorpus back = load_corpus(tmp.path / "corpus.json");
  REQUIRE(back.entries.size() == corpus.entries.size());
  for (size_t i = 0; i < corpus.entries.size(); ++i) {
    CHECK(back.entries[i].template_text == corpus.entries[i].template_text);
    CHECK(back.entries[i].category == corpus.entries[i].category);
  }
  CHECK(back.background_overrides == corpus.background_overrides);
}
