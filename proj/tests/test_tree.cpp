#include "topshift/tree.hpp"

#include <random>

#include "doctest.h"
#include "helpers.hpp"

using namespace topshift;
using test_helpers::kFigureFlat;
using test_helpers::kFigureNested;

TEST_CASE("parse_tree builds the flat music tree") {
  TopTree tree = parse_tree(kFigureFlat);
  const auto& root = tree.root();
  CHECK(root->is_intent());
  CHECK(root->label().str() == "IN:PLAY_MUSIC");
  REQUIRE(root->children().size() == 4);
  CHECK(root->children()[0]->is_token());
  CHECK(root->children()[0]->word() == "Play");
  CHECK(root->children()[1]->label().str() == "SL:MUSIC_TRACK_TITLE");
  CHECK(root->children()[1]->span_start() == 2);
  CHECK(root->children()[1]->span_end() == 2);
  CHECK(root->children()[3]->label().str() == "SL:MUSIC_ARTIST_NAME");
  CHECK(tree.utterance().str() == "Play Paradise by Coldplay");
  CHECK(serialize_tree(tree) == kFigureFlat);
}

TEST_CASE("minimal single-intent tree") {
  TopTree tree = parse_tree("[IN:X hi ]");
  CHECK(tree.utterance().size() == 1);
  CHECK(serialize_tree(tree) == "[IN:X hi ]");
}

TEST_CASE("root must be an intent") {
  CHECK_THROWS_WITH_AS(parse_tree("[SL:X hi ]"), doctest::Contains("root"), TreeError);
  try {
    parse_tree("[SL:X hi ]");
  } catch (const TreeError& e) {
    CHECK(e.kind == TreeError::Kind::InvalidTopStructure);
  }
}

TEST_CASE("parse errors carry their kind") {
  auto kind_of = [](const char* text) {
    try {
      parse_tree(text);
    } catch (const TreeError& e) {
      return e.kind;
    }
    return TreeError::Kind::InvalidToken;  // placeholder: test fails below
  };
  CHECK(kind_of("[IN:X hi") == TreeError::Kind::UnbalancedBrackets);
  CHECK(kind_of("[IN:X hi ] ]") == TreeError::Kind::UnbalancedBrackets);
  CHECK(kind_of("[XX:FOO hi ]") == TreeError::Kind::UnknownLabelPrefix);
  CHECK(kind_of("[IN:lower hi ]") == TreeError::Kind::UnknownLabelPrefix);
  CHECK(kind_of("[IN:X ]") == TreeError::Kind::EmptyConstituent);
  CHECK(kind_of("[IN:X [IN:Y hi ] ]") == TreeError::Kind::InvalidTopStructure);
  CHECK(kind_of("hi [IN:X a ]") == TreeError::Kind::InvalidTopStructure);
}

TEST_CASE("canonicalization is idempotent over messy spacing") {
  const std::string messy = "  [IN:X   a    [SL:Y  b ]   ]  ";
  TopTree tree = parse_tree(messy);
  const std::string canonical = serialize_tree(tree);
  CHECK(canonical == "[IN:X a [SL:Y b ] ]");
  CHECK(serialize_tree(parse_tree(canonical)) == canonical);
}

TEST_CASE("round-trip identity over random trees") {
  std::mt19937_64 rng(7);
  test_helpers::RandomTreeGen gen(rng);
  for (int i = 0; i < 1000; ++i) {
    TopTree t = gen.tree();
    TopTree back = parse_tree(serialize_tree(t));
    CHECK(back == t);
  }
}

TEST_CASE("validate_tree reports named violations") {
  // Compositional reference tree is valid.
  TopTree nested = parse_tree(kFigureNested);
  CHECK(validate_tree(nested.root(), nested.utterance()).ok());

  // Slot with two intent children.
  auto two_intents = Node::constituent(
      Label::slot("S"),
      {Node::constituent(Label::intent("A"), {Node::token(1, "x")}),
       Node::constituent(Label::intent("B"), {Node::token(2, "y")})});
  auto root = Node::constituent(Label::intent("R"), {two_intents});
  auto report = validate_tree(root, Utterance({"x", "y"}));
  REQUIRE(!report.ok());
  bool found = false;
  for (const auto& v : report.violations) found |= v.rule == "slot-multiple-intents";
  CHECK(found);

  // Intent directly under intent.
  auto inner = Node::constituent(Label::intent("A"), {Node::token(1, "x")});
  auto bad_root = Node::constituent(Label::intent("R"), {inner, Node::token(2, "y")});
  report = validate_tree(bad_root, Utterance({"x", "y"}));
  REQUIRE(!report.ok());
  CHECK(report.violations[0].rule == "intent-child-of-intent");
  CHECK(report.violations[0].path == "root.0");

  // Slot mixing a token and an intent.
  auto mixed = Node::constituent(
      Label::slot("S"), {Node::token(1, "x"),
                         Node::constituent(Label::intent("A"), {Node::token(2, "y")})});
  report = validate_tree(Node::constituent(Label::intent("R"), {mixed}), Utterance({"x", "y"}));
  REQUIRE(!report.ok());
  bool mixed_found = false;
  for (const auto& v : report.violations) mixed_found |= v.rule == "slot-mixed-children";
  CHECK(mixed_found);

  // Leaf mismatch against the utterance.
  TopTree ok = parse_tree("[IN:X a b ]");
  report = validate_tree(ok.root(), Utterance({"a", "c"}));
  CHECK(!report.ok());
}

TEST_CASE("tree_stats depth and compositionality") {
  auto flat = tree_stats(parse_tree(kFigureFlat));
  CHECK(flat.depth == 2);
  CHECK(!flat.is_compositional);
  CHECK(flat.intent_count == 1);
  CHECK(flat.slot_count == 2);
  REQUIRE(flat.spans.size() == 3);
  CHECK(flat.spans[0].label.str() == "IN:PLAY_MUSIC");
  CHECK(flat.spans[0].start == 1);
  CHECK(flat.spans[0].end == 4);
  CHECK(flat.spans[1].length == 1);

  auto nested = tree_stats(parse_tree(kFigureNested));
  CHECK(nested.depth > 2);
  CHECK(nested.is_compositional);

  auto tiny = tree_stats(parse_tree("[IN:X hi ]"));
  CHECK(tiny.depth == 1);
  CHECK(tiny.intent_count == 1);
  CHECK(tiny.slot_count == 0);
  CHECK(!tiny.is_compositional);
}

TEST_CASE("utterance token constraints") {
  CHECK_THROWS_AS(Utterance(std::vector<std::string>{}), TreeError);
  CHECK_THROWS_AS(Utterance({"a", ""}), TreeError);
  CHECK_THROWS_AS(Utterance({"a]b"}), TreeError);
  CHECK_THROWS_AS(parse_tree("[IN:X a]b ]"), TreeError);
}
