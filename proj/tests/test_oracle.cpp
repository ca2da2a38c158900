#include "topshift/oracle.hpp"

#include <random>

#include "doctest.h"
#include "helpers.hpp"

using namespace topshift;
using test_helpers::kFigureFlat;

TEST_CASE("oracle sequences match the worked transition columns") {
  TopTree tree = parse_tree(kFigureFlat);

  CHECK(format_action_sequence(oracle_actions(tree, SystemKind::TopDown)) ==
        "NT(IN:PLAY_MUSIC) SHIFT NT(SL:MUSIC_TRACK_TITLE) SHIFT REDUCE SHIFT "
        "NT(SL:MUSIC_ARTIST_NAME) SHIFT REDUCE REDUCE");

  CHECK(format_action_sequence(oracle_actions(tree, SystemKind::BottomUp)) ==
        "SHIFT SHIFT REDUCE#1(SL:MUSIC_TRACK_TITLE) SHIFT SHIFT "
        "REDUCE#1(SL:MUSIC_ARTIST_NAME) REDUCE#4(IN:PLAY_MUSIC) FINISH");

  CHECK(format_action_sequence(oracle_actions(tree, SystemKind::InOrder)) ==
        "SHIFT NT(IN:PLAY_MUSIC) SHIFT NT(SL:MUSIC_TRACK_TITLE) REDUCE SHIFT SHIFT "
        "NT(SL:MUSIC_ARTIST_NAME) REDUCE REDUCE FINISH");
}

TEST_CASE("oracle round-trip and length laws over random trees") {
  std::mt19937_64 rng(23);
  test_helpers::RandomTreeGen gen(rng);
  for (int i = 0; i < 1000; ++i) {
    TopTree t = gen.tree();
    const auto stats = tree_stats(t);
    const int constituents = stats.intent_count + stats.slot_count;
    const int n = t.utterance().size();
    for (auto system : {SystemKind::TopDown, SystemKind::BottomUp, SystemKind::InOrder}) {
      auto actions = oracle_actions(t, system);
      // execute() checks per-step legality, so a throw would fail the test.
      TopTree back = execute(t.utterance(), actions, system);
      CHECK(back == t);
      const int len = static_cast<int>(actions.size());
      switch (system) {
        case SystemKind::TopDown: CHECK(len == 2 * constituents + n); break;
        case SystemKind::BottomUp: CHECK(len == constituents + n + 1); break;
        case SystemKind::InOrder: CHECK(len == 2 * constituents + n + 1); break;
      }
    }
  }
}
