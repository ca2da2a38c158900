#include "topshift/transitions.hpp"

#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "topshift/oracle.hpp"

using namespace topshift;
using test_helpers::kFigureFlat;

namespace {

LabelVocab music_vocab() {
  LabelVocab v;
  v.add(Label::intent("PLAY_MUSIC"));
  v.add(Label::slot("MUSIC_TRACK_TITLE"));
  v.add(Label::slot("MUSIC_ARTIST_NAME"));
  return v;
}

std::vector<std::string> render_stack(const Configuration& c) {
  std::vector<std::string> out;
  for (const auto& item : c.stack) out.push_back(item.str());
  return out;
}

std::vector<std::string> render_buffer(const Configuration& c) {
  std::vector<std::string> out;
  for (int p = c.buffer_cursor; p <= c.n(); ++p) out.push_back(c.utterance->token(p));
  return out;
}

bool contains_action(const std::vector<Action>& actions, const Action& a) {
  for (const auto& x : actions) {
    if (x == a) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("init_config starts with a full buffer and an empty stack") {
  auto u = Utterance::tokenize("Play Paradise by Coldplay");
  auto c = init_config(u, SystemKind::TopDown);
  CHECK(c.stack.empty());
  CHECK(c.buffer_cursor == 1);
  CHECK(!c.finished);
  CHECK(render_buffer(c) == std::vector<std::string>{"Play", "Paradise", "by", "Coldplay"});

  auto c2 = init_config(Utterance::tokenize("hi"), SystemKind::InOrder);
  CHECK(c2.stack.empty());
  CHECK(c2.buffer_cursor == 1);
  CHECK(!c2.finished);

  CHECK_THROWS_AS(init_config(Utterance::tokenize("   "), SystemKind::TopDown), TreeError);
}

TEST_CASE("top-down initial configuration admits only intent non-terminals") {
  auto c = init_config(Utterance::tokenize("Play Paradise by Coldplay"), SystemKind::TopDown);
  auto legal = legal_actions(c, music_vocab());
  REQUIRE(legal.size() == 1);
  CHECK(legal[0] == Action::non_terminal(Label::intent("PLAY_MUSIC")));
}

TEST_CASE("top-down transition sequence reproduces every configuration row") {
  auto u = Utterance::tokenize("Play Paradise by Coldplay");
  auto c = init_config(u, SystemKind::TopDown);
  const auto vocab = music_vocab();

  struct Row {
    const char* action;
    std::vector<std::string> stack;
    std::vector<std::string> buffer;
  };
  const std::string title = "[SL:MUSIC_TRACK_TITLE Paradise ]";
  const std::string artist = "[SL:MUSIC_ARTIST_NAME Coldplay ]";
  const std::vector<Row> rows = {
      {"NT(IN:PLAY_MUSIC)", {"IN:PLAY_MUSIC"}, {"Play", "Paradise", "by", "Coldplay"}},
      {"SHIFT", {"IN:PLAY_MUSIC", "Play"}, {"Paradise", "by", "Coldplay"}},
      {"NT(SL:MUSIC_TRACK_TITLE)",
       {"IN:PLAY_MUSIC", "Play", "SL:MUSIC_TRACK_TITLE"},
       {"Paradise", "by", "Coldplay"}},
      {"SHIFT",
       {"IN:PLAY_MUSIC", "Play", "SL:MUSIC_TRACK_TITLE", "Paradise"},
       {"by", "Coldplay"}},
      {"REDUCE", {"IN:PLAY_MUSIC", "Play", title}, {"by", "Coldplay"}},
      {"SHIFT", {"IN:PLAY_MUSIC", "Play", title, "by"}, {"Coldplay"}},
      {"NT(SL:MUSIC_ARTIST_NAME)",
       {"IN:PLAY_MUSIC", "Play", title, "by", "SL:MUSIC_ARTIST_NAME"},
       {"Coldplay"}},
      {"SHIFT", {"IN:PLAY_MUSIC", "Play", title, "by", "SL:MUSIC_ARTIST_NAME", "Coldplay"}, {}},
      {"REDUCE", {"IN:PLAY_MUSIC", "Play", title, "by", artist}, {}},
      {"REDUCE", {kFigureFlat}, {}},
  };

  for (const auto& row : rows) {
    const Action a = Action::parse(row.action);
    CHECK(contains_action(legal_actions(c, vocab), a));
    c = apply_action(c, a);
    CHECK(render_stack(c) == row.stack);
    CHECK(render_buffer(c) == row.buffer);
  }
  CHECK(is_final(c));
}

TEST_CASE("bottom-up transition sequence tracks the finished flag") {
  auto u = Utterance::tokenize("Play Paradise by Coldplay");
  auto c = init_config(u, SystemKind::BottomUp);
  const auto vocab = music_vocab();

  const std::string title = "[SL:MUSIC_TRACK_TITLE Paradise ]";
  const std::string artist = "[SL:MUSIC_ARTIST_NAME Coldplay ]";
  struct Row {
    const char* action;
    std::vector<std::string> stack;
    std::vector<std::string> buffer;
    bool f;
  };
  const std::vector<Row> rows = {
      {"SHIFT", {"Play"}, {"Paradise", "by", "Coldplay"}, false},
      {"SHIFT", {"Play", "Paradise"}, {"by", "Coldplay"}, false},
      {"REDUCE#1(SL:MUSIC_TRACK_TITLE)", {"Play", title}, {"by", "Coldplay"}, false},
      {"SHIFT", {"Play", title, "by"}, {"Coldplay"}, false},
      {"SHIFT", {"Play", title, "by", "Coldplay"}, {}, false},
      {"REDUCE#1(SL:MUSIC_ARTIST_NAME)", {"Play", title, "by", artist}, {}, false},
      {"REDUCE#4(IN:PLAY_MUSIC)", {kFigureFlat}, {}, false},
      {"FINISH", {kFigureFlat}, {}, true},
  };
  for (const auto& row : rows) {
    const Action a = Action::parse(row.action);
    CHECK(contains_action(legal_actions(c, vocab), a));
    c = apply_action(c, a);
    CHECK(render_stack(c) == row.stack);
    CHECK(render_buffer(c) == row.buffer);
    CHECK(c.finished == row.f);
  }
  CHECK(is_final(c));
}

TEST_CASE("the complete pre-finish bottom-up configuration is not final") {
  auto u = Utterance::tokenize("hi");
  auto c = init_config(u, SystemKind::BottomUp);
  c = apply_action(c, Action::shift());
  c = apply_action(c, Action::reduce_k(1, Label::intent("X")));
  CHECK(render_stack(c) == std::vector<std::string>{"[IN:X hi ]"});
  CHECK(!is_final(c));  // f is still false despite the complete tree
  c = apply_action(c, Action::finish());
  CHECK(is_final(c));
}

TEST_CASE("in-order transition sequence reproduces every configuration row") {
  auto u = Utterance::tokenize("Play Paradise by Coldplay");
  auto c = init_config(u, SystemKind::InOrder);
  const auto vocab = music_vocab();

  const std::string title = "[SL:MUSIC_TRACK_TITLE Paradise ]";
  const std::string artist = "[SL:MUSIC_ARTIST_NAME Coldplay ]";
  struct Row {
    const char* action;
    std::vector<std::string> stack;
    std::vector<std::string> buffer;
    bool f;
  };
  const std::vector<Row> rows = {
      {"SHIFT", {"Play"}, {"Paradise", "by", "Coldplay"}, false},
      {"NT(IN:PLAY_MUSIC)", {"Play", "IN:PLAY_MUSIC"}, {"Paradise", "by", "Coldplay"}, false},
      {"SHIFT", {"Play", "IN:PLAY_MUSIC", "Paradise"}, {"by", "Coldplay"}, false},
      {"NT(SL:MUSIC_TRACK_TITLE)",
       {"Play", "IN:PLAY_MUSIC", "Paradise", "SL:MUSIC_TRACK_TITLE"},
       {"by", "Coldplay"},
       false},
      {"REDUCE", {"Play", "IN:PLAY_MUSIC", title}, {"by", "Coldplay"}, false},
      {"SHIFT", {"Play", "IN:PLAY_MUSIC", title, "by"}, {"Coldplay"}, false},
      {"SHIFT", {"Play", "IN:PLAY_MUSIC", title, "by", "Coldplay"}, {}, false},
      {"NT(SL:MUSIC_ARTIST_NAME)",
       {"Play", "IN:PLAY_MUSIC", title, "by", "Coldplay", "SL:MUSIC_ARTIST_NAME"},
       {},
       false},
      {"REDUCE", {"Play", "IN:PLAY_MUSIC", title, "by", artist}, {}, false},
      {"REDUCE", {kFigureFlat}, {}, false},
      {"FINISH", {kFigureFlat}, {}, true},
  };
  for (const auto& row : rows) {
    const Action a = Action::parse(row.action);
    CHECK(contains_action(legal_actions(c, vocab), a));
    c = apply_action(c, a);
    CHECK(render_stack(c) == row.stack);
    CHECK(render_buffer(c) == row.buffer);
    CHECK(c.finished == row.f);
  }
  CHECK(is_final(c));
}

TEST_CASE("bottom-up blocks SHIFT over an intent constituent") {
  auto u = Utterance::tokenize("a b");
  auto c = init_config(u, SystemKind::BottomUp);
  c = apply_action(c, Action::shift());
  c = apply_action(c, Action::reduce_k(1, Label::intent("A")));
  // Buffer still holds "b" but the intent on top forces a slot reduce first.
  auto legal = legal_actions(c, music_vocab());
  CHECK(!contains_action(legal, Action::shift()));
  for (const auto& a : legal) {
    CHECK(a.kind == Action::Kind::ReduceK);
    CHECK(a.k == 1);
    CHECK(a.label.kind == LabelKind::Slot);
  }
}

TEST_CASE("in-order legality at the Figure 4 third row") {
  auto u = Utterance::tokenize("Play Paradise by Coldplay");
  auto c = init_config(u, SystemKind::InOrder);
  c = apply_action(c, Action::shift());
  c = apply_action(c, Action::non_terminal(Label::intent("PLAY_MUSIC")));
  // Stack [Play, IN:PLAY_MUSIC(open)], cursor at "Paradise".
  auto legal = legal_actions(c, music_vocab());
  CHECK(contains_action(legal, Action::shift()));
  CHECK(contains_action(legal, Action::reduce()));
  CHECK(!contains_action(legal, Action::non_terminal(Label::slot("MUSIC_TRACK_TITLE"))));
  CHECK(!contains_action(legal, Action::non_terminal(Label::intent("PLAY_MUSIC"))));
}

TEST_CASE("shift on an empty buffer is illegal") {
  auto u = Utterance::tokenize("hi");
  for (auto system : {SystemKind::TopDown, SystemKind::BottomUp, SystemKind::InOrder}) {
    auto c = init_config(u, system);
    if (system == SystemKind::TopDown) {
      c = apply_action(c, Action::non_terminal(Label::intent("X")));
    }
    c = apply_action(c, Action::shift());
    CHECK_THROWS_AS(apply_action(c, Action::shift()), IllegalActionError);
  }
}

TEST_CASE("top-down guards against stranding") {
  auto u = Utterance::tokenize("a b");
  auto c = init_config(u, SystemKind::TopDown);
  // SHIFT before any non-terminal is illegal.
  CHECK_THROWS_AS(apply_action(c, Action::shift()), IllegalActionError);
  c = apply_action(c, Action::non_terminal(Label::intent("A")));
  c = apply_action(c, Action::shift());
  // Reducing the bottom-most open NT while the buffer is nonempty is blocked.
  CHECK_THROWS_AS(apply_action(c, Action::reduce()), IllegalActionError);
  c = apply_action(c, Action::shift());
  c = apply_action(c, Action::reduce());
  CHECK(is_final(c));
}

TEST_CASE("top-down blocks SHIFT into a slot holding an intent child") {
  auto u = Utterance::tokenize("a b c");
  auto c = init_config(u, SystemKind::TopDown);
  c = apply_action(c, Action::non_terminal(Label::intent("A")));
  c = apply_action(c, Action::shift());
  c = apply_action(c, Action::non_terminal(Label::slot("C")));
  c = apply_action(c, Action::non_terminal(Label::intent("B")));
  c = apply_action(c, Action::shift());
  c = apply_action(c, Action::reduce());  // closes IN:B over "b"
  // Slot C now holds an intent child; SHIFT must be illegal, REDUCE legal.
  auto legal = legal_actions(c, music_vocab());
  CHECK(!contains_action(legal, Action::shift()));
  CHECK(contains_action(legal, Action::reduce()));
}

TEST_CASE("execute folds a sequence and validates finality") {
  auto u = Utterance::tokenize("Play Paradise by Coldplay");
  auto top_down = parse_action_sequence(
      "NT(IN:PLAY_MUSIC) SHIFT NT(SL:MUSIC_TRACK_TITLE) SHIFT REDUCE SHIFT "
      "NT(SL:MUSIC_ARTIST_NAME) SHIFT REDUCE REDUCE");
  CHECK(serialize_tree(execute(u, top_down, SystemKind::TopDown)) == kFigureFlat);

  auto in_order = parse_action_sequence(
      "SHIFT NT(IN:PLAY_MUSIC) SHIFT NT(SL:MUSIC_TRACK_TITLE) REDUCE SHIFT SHIFT "
      "NT(SL:MUSIC_ARTIST_NAME) REDUCE REDUCE FINISH");
  CHECK(serialize_tree(execute(u, in_order, SystemKind::InOrder)) == kFigureFlat);

  auto bottom_up_truncated = parse_action_sequence(
      "SHIFT SHIFT REDUCE#1(SL:MUSIC_TRACK_TITLE) SHIFT SHIFT "
      "REDUCE#1(SL:MUSIC_ARTIST_NAME) REDUCE#4(IN:PLAY_MUSIC)");
  CHECK_THROWS_AS(execute(u, bottom_up_truncated, SystemKind::BottomUp), NotFinalError);

  auto bad = parse_action_sequence("NT(IN:PLAY_MUSIC) REDUCE");
  try {
    execute(u, bad, SystemKind::TopDown);
    FAIL("expected IllegalActionError");
  } catch (const IllegalActionError& e) {
    CHECK(e.step == 1);
  }
}

TEST_CASE("action text format round-trips") {
  for (const char* text : {"SHIFT", "REDUCE", "FINISH", "NT(IN:PLAY_MUSIC)", "NT(SL:DATE)",
                           "REDUCE#4(IN:PLAY_MUSIC)", "REDUCE#1(SL:ARTIST)"}) {
    CHECK(Action::parse(text).str() == text);
  }
  CHECK_THROWS_AS(Action::parse("NOPE"), TransitionError);
  CHECK_THROWS_AS(Action::parse("NT(XX:Y)"), TreeError);
  CHECK_THROWS_AS(Action::parse("REDUCE#0(IN:A)"), TransitionError);
}

TEST_CASE("apply_action is a pure function of configuration and action") {
  auto u = Utterance::tokenize("a b c");
  auto c = init_config(u, SystemKind::InOrder);
  c = apply_action(c, Action::shift());
  const auto snapshot = c.str();
  auto next1 = apply_action(c, Action::non_terminal(Label::intent("A")));
  auto next2 = apply_action(c, Action::non_terminal(Label::intent("A")));
  CHECK(c.str() == snapshot);
  CHECK(next1.str() == next2.str());
}

TEST_CASE("random legal walks only ever finish with valid trees") {
  std::mt19937_64 rng(11);
  LabelVocab vocab = music_vocab();
  vocab.add(Label::intent("X"));
  int finished_count = 0;
  for (int iter = 0; iter < 300; ++iter) {
    for (auto system : {SystemKind::TopDown, SystemKind::BottomUp, SystemKind::InOrder}) {
      const int n = std::uniform_int_distribution<int>(1, 6)(rng);
      std::vector<std::string> tokens;
      for (int i = 0; i < n; ++i) tokens.push_back("t" + std::to_string(i));
      Utterance u(tokens);
      Configuration c = init_config(u, system);
      const int budget = 8 * n + 16;
      for (int step = 0; step < budget && !is_final(c); ++step) {
        auto legal = legal_actions(c, vocab);
        REQUIRE(!legal.empty());
        c = apply_action(
            c, legal[std::uniform_int_distribution<size_t>(0, legal.size() - 1)(rng)]);
      }
      if (is_final(c)) {
        ++finished_count;
        auto report = validate_tree(c.stack[0].node, u);
        CHECK(report.ok());
      }
    }
  }
  CHECK(finished_count > 0);
}
