#pragma once

// Static oracles: the unique gold action sequence for a tree under each
// transition system. Top-down follows a pre-order traversal, bottom-up a
// post-order one, in-order emits the non-terminal after the first child.

#include <vector>

#include "topshift/transitions.hpp"
#include "topshift/tree.hpp"

namespace topshift {

// execute(tree.utterance(), oracle_actions(tree, s), s) == tree for every
// valid tree and every system; every emitted action is legal at its step.
std::vector<Action> oracle_actions(const TopTree& tree, SystemKind system);

}  // namespace topshift
