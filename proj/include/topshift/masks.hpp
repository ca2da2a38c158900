#pragma once

// Stack/buffer attention masks over input positions, kept in lockstep with a
// transition configuration. A position is attendable by the stack head iff
// it is the representative (leftmost) token of a stack item; the buffer head
// sees exactly the unread suffix. Open non-terminals are invisible: heads
// only attend input tokens.

#include <string>
#include <vector>

#include "topshift/transitions.hpp"

namespace topshift {

struct InconsistentMaskError : Error {
  using Error::Error;
};

struct MaskPair {
  std::vector<bool> stack_mask;   // index 0 = position 1; true = attendable
  std::vector<bool> buffer_mask;  // always a suffix {cursor..n}

  int size() const { return static_cast<int>(stack_mask.size()); }
  bool stack_at(int position) const { return stack_mask[position - 1]; }
  bool buffer_at(int position) const { return buffer_mask[position - 1]; }
  std::vector<int> stack_positions() const;
  std::vector<int> buffer_positions() const;
  bool operator==(const MaskPair& o) const {
    return stack_mask == o.stack_mask && buffer_mask == o.buffer_mask;
  }
};

// stack mask all false, buffer mask all true. Throws EmptyUtteranceError.
MaskPair initial_masks(int n);

// The masks any synchronized replay must show for `config`: one set bit per
// token-bearing stack item (its span start), buffer = {cursor..n}.
MaskPair masks_for_config(const Configuration& config);

// Applies the per-action update: Shift moves the first buffer position to
// the stack mask; Reduce/ReduceK clears the new constituent's positions
// except the leftmost; NT and Finish change nothing. `action` must be legal
// in `config_before`; throws InconsistentMaskError if `masks` does not match
// `config_before`.
MaskPair update_masks(const MaskPair& masks, const Action& action,
                      const Configuration& config_before);

// Debug dump line: "t3 S={1,2} B={3,4}".
std::string format_mask_step(int step, const MaskPair& masks);

}  // namespace topshift
