#pragma once

// Shared test utilities: a self-contained random valid-tree generator
// (independent of the library's synthetic-corpus generator) and the worked
// example trees.

#include <random>
#include <string>
#include <vector>

#include "topshift/tree.hpp"

namespace test_helpers {

using namespace topshift;

struct TreeGenOptions {
  int max_depth = 5;      // constituent nesting limit
  int max_children = 3;   // non-first extra items per constituent
  std::vector<std::string> intents = {"A", "B"};
  std::vector<std::string> slots = {"C", "D"};
  std::vector<std::string> words = {"w1", "w2", "w3"};
  double nest_prob = 0.35;
};

class RandomTreeGen {
 public:
  RandomTreeGen(std::mt19937_64& rng, TreeGenOptions opts = {})
      : rng_(rng), opts_(std::move(opts)) {}

  TopTree tree() {
    int pos = 1;
    NodePtr root = intent(1, pos);
    std::vector<std::string> tokens;
    collect(root, tokens);
    return TopTree(root, Utterance(tokens));
  }

 private:
  std::mt19937_64& rng_;
  TreeGenOptions opts_;

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }
  std::string pick(const std::vector<std::string>& v) {
    return v[static_cast<size_t>(uniform(0, static_cast<int>(v.size()) - 1))];
  }

  NodePtr word(int& pos) { return Node::token(pos++, pick(opts_.words)); }

  NodePtr slot(int depth, int& pos) {
    if (depth + 1 <= opts_.max_depth && coin(opts_.nest_prob)) {
      return Node::constituent(Label::slot(pick(opts_.slots)), {intent(depth + 1, pos)});
    }
    std::vector<NodePtr> children;
    const int words_count = uniform(1, 2);
    for (int i = 0; i < words_count; ++i) children.push_back(word(pos));
    return Node::constituent(Label::slot(pick(opts_.slots)), std::move(children));
  }

  NodePtr intent(int depth, int& pos) {
    std::vector<NodePtr> children;
    const int count = uniform(1, opts_.max_children);
    for (int i = 0; i < count; ++i) {
      if (depth + 1 <= opts_.max_depth && coin(0.5)) {
        children.push_back(slot(depth + 1, pos));
      } else {
        children.push_back(word(pos));
      }
    }
    return Node::constituent(Label::intent(pick(opts_.intents)), std::move(children));
  }

  static void collect(const NodePtr& node, std::vector<std::string>& tokens) {
    if (node->is_token()) {
      tokens.push_back(node->word());
      return;
    }
    for (const auto& c : node->children()) collect(c, tokens);
  }
};

inline const char* kFigureFlat =
    "[IN:PLAY_MUSIC Play [SL:MUSIC_TRACK_TITLE Paradise ] by [SL:MUSIC_ARTIST_NAME Coldplay ] ]";

inline const char* kFigureNested =
    "[IN:GET_ESTIMATED_DURATION How long will it take to drive from "
    "[SL:SOURCE [IN:GET_LOCATION_HOME [SL:CONTACT my ] apartment ] ] to "
    "[SL:DESTINATION San Diego ] ]";

}  // namespace test_helpers
