#include "topshift/masks.hpp"

#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "topshift/oracle.hpp"

using namespace topshift;

TEST_CASE("initial masks: empty stack side, full buffer side") {
  auto m = initial_masks(4);
  CHECK(m.stack_positions().empty());
  CHECK(m.buffer_positions() == std::vector<int>{1, 2, 3, 4});

  auto m1 = initial_masks(1);
  CHECK(m1.stack_positions().empty());
  CHECK(m1.buffer_positions() == std::vector<int>{1});

  CHECK_THROWS_AS(initial_masks(0), EmptyUtteranceError);
}

TEST_CASE("shift moves the first buffer position to the stack mask") {
  auto u = Utterance::tokenize("Play Paradise by Coldplay");
  auto c = init_config(u, SystemKind::InOrder);
  auto m = update_masks(initial_masks(4), Action::shift(), c);
  CHECK(m.stack_positions() == std::vector<int>{1});
  CHECK(m.buffer_positions() == std::vector<int>{2, 3, 4});
}

TEST_CASE("non-terminals leave both masks unchanged") {
  auto u = Utterance::tokenize("Play Paradise by Coldplay");
  auto c = init_config(u, SystemKind::InOrder);
  auto m = update_masks(initial_masks(4), Action::shift(), c);
  c = apply_action(c, Action::shift());
  auto m2 = update_masks(m, Action::non_terminal(Label::intent("PLAY_MUSIC")), c);
  CHECK(m2 == m);
}

TEST_CASE("reduce keeps the leftmost token as constituent representative") {
  // Replay the in-order trace: after reducing SL:MUSIC_TRACK_TITLE over
  // token 2 only, the stack mask keeps both 1 and 2.
  auto u = Utterance::tokenize("Play Paradise by Coldplay");
  auto c = init_config(u, SystemKind::InOrder);
  auto m = initial_masks(4);
  auto run = [&](const Action& a) {
    m = update_masks(m, a, c);
    c = apply_action(c, a);
  };
  run(Action::shift());
  run(Action::non_terminal(Label::intent("PLAY_MUSIC")));
  run(Action::shift());
  run(Action::non_terminal(Label::slot("MUSIC_TRACK_TITLE")));
  run(Action::reduce());
  CHECK(m.stack_positions() == std::vector<int>{1, 2});
  CHECK(m.buffer_positions() == std::vector<int>{3, 4});

  // Finish the parse: the root reduce collapses the span onto position 1.
  run(Action::shift());
  run(Action::shift());
  run(Action::non_terminal(Label::slot("MUSIC_ARTIST_NAME")));
  run(Action::reduce());
  CHECK(m.stack_positions() == std::vector<int>{1, 2, 3, 4});
  run(Action::reduce());
  CHECK(m.stack_positions() == std::vector<int>{1});
  CHECK(m.buffer_positions().empty());
  run(Action::finish());
  CHECK(m.stack_positions() == std::vector<int>{1});
}

TEST_CASE("update_masks rejects masks out of sync with the configuration") {
  auto u = Utterance::tokenize("a b");
  auto c = init_config(u, SystemKind::InOrder);
  auto m = initial_masks(2);
  m.stack_mask[0] = true;  // stack is empty, so this is inconsistent
  CHECK_THROWS_AS(update_masks(m, Action::shift(), c), InconsistentMaskError);
}

TEST_CASE("oracle replay keeps masks synchronized with configurations") {
  std::mt19937_64 rng(5);
  test_helpers::RandomTreeGen gen(rng);
  for (int i = 0; i < 100; ++i) {
    TopTree t = gen.tree();
    for (auto system : {SystemKind::TopDown, SystemKind::BottomUp, SystemKind::InOrder}) {
      Configuration c = init_config(t.utterance(), system);
      MaskPair m = initial_masks(t.utterance().size());
      for (const auto& a : oracle_actions(t, system)) {
        CHECK(m == masks_for_config(c));
        const auto before_stack = m.stack_positions().size();
        const auto before_buffer = m.buffer_positions().size();
        // Number of completed items a reduce merges (each holds one
        // representative position in the stack mask).
        size_t merged = 0;
        if (a.kind == Action::Kind::ReduceK) {
          merged = static_cast<size_t>(a.k);
        } else if (a.kind == Action::Kind::Reduce) {
          size_t open = c.stack.size();
          for (size_t i = c.stack.size(); i-- > 0;) {
            if (c.stack[i].is_open()) {
              open = i;
              break;
            }
          }
          merged = c.stack.size() - open - 1 + (system == SystemKind::InOrder ? 1 : 0);
        }
        m = update_masks(m, a, c);
        c = apply_action(c, a);
        // Cardinality laws.
        if (a.kind == Action::Kind::Shift) {
          CHECK(m.buffer_positions().size() == before_buffer - 1);
          CHECK(m.stack_positions().size() == before_stack + 1);
        } else {
          CHECK(m.buffer_positions().size() == before_buffer);
          if (a.kind == Action::Kind::Reduce || a.kind == Action::Kind::ReduceK) {
            CHECK(m.stack_positions().size() == before_stack - (merged - 1));
          } else {
            CHECK(m.stack_positions().size() == before_stack);
          }
        }
      }
      CHECK(m == masks_for_config(c));
    }
  }
}

TEST_CASE("mask debug dump format") {
  auto m = initial_masks(3);
  CHECK(format_mask_step(0, m) == "t0 S={} B={1,2,3}");
  auto u = Utterance::tokenize("a b c");
  auto c = init_config(u, SystemKind::BottomUp);
  m = update_masks(m, Action::shift(), c);
  CHECK(format_mask_step(1, m) == "t1 S={1} B={2,3}");
}
