#pragma once

// Greedy and beam-search decoding with hard legality masking. Every returned
// parse is a valid TOP tree; pathological scorers that never reach a final
// configuration within the step budget raise StepLimitError instead.

#include <vector>

#include "topshift/scorer.hpp"

namespace topshift {

struct StepLimitError : Error {
  using Error::Error;
};

// Step budget: top-down/in-order admit unbounded NT+Reduce chains on the
// same span, so a cap turns a stuck scorer into an error rather than a hang.
inline int step_budget(int n) { return 8 * n + 16; }

struct ParseHypothesis {
  TopTree tree;
  std::vector<Action> trace;
  double log_prob = 0.0;
};

// Argmax over legal actions at each step; ties break by the fixed action
// order (legal_actions output order). Throws StepLimitError past the budget.
ParseHypothesis greedy_parse(const Utterance& utterance, const Scorer& scorer,
                             SystemKind system, const LabelVocab& label_vocab);

// Length-synchronized beam. Finished hypotheses are held aside and compete
// by total log-prob; search stops when no unfinished hypothesis can beat the
// best finished score (log-probs only decrease) or the beam empties. Results
// sorted by score descending, at most beam_size of them. beam_size=1 follows
// exactly the greedy path. No length normalization.
std::vector<ParseHypothesis> beam_parse(const Utterance& utterance, const Scorer& scorer,
                                        SystemKind system, const LabelVocab& label_vocab,
                                        int beam_size);

}  // namespace topshift
