#include "topshift/masks.hpp"

namespace topshift {

std::vector<int> MaskPair::stack_positions() const {
  std::vector<int> out;
  for (int p = 1; p <= size(); ++p) {
    if (stack_at(p)) out.push_back(p);
  }
  return out;
}

std::vector<int> MaskPair::buffer_positions() const {
  std::vector<int> out;
  for (int p = 1; p <= size(); ++p) {
    if (buffer_at(p)) out.push_back(p);
  }
  return out;
}

MaskPair initial_masks(int n) {
  if (n < 1) throw EmptyUtteranceError("masks require n >= 1");
  MaskPair m;
  m.stack_mask.assign(static_cast<size_t>(n), false);
  m.buffer_mask.assign(static_cast<size_t>(n), true);
  return m;
}

MaskPair masks_for_config(const Configuration& config) {
  MaskPair m;
  const int n = config.n();
  m.stack_mask.assign(static_cast<size_t>(n), false);
  m.buffer_mask.assign(static_cast<size_t>(n), false);
  for (const auto& item : config.stack) {
    if (item.is_subtree()) m.stack_mask[item.node->span_start() - 1] = true;
  }
  for (int p = config.buffer_cursor; p <= n; ++p) m.buffer_mask[p - 1] = true;
  return m;
}

namespace {

// Span of the constituent a Reduce/ReduceK builds from `config`.
std::pair<int, int> reduced_span(const Configuration& config, const Action& action) {
  const auto& stack = config.stack;
  size_t open = stack.size();
  for (size_t i = stack.size(); i-- > 0;) {
    if (stack[i].is_open()) {
      open = i;
      break;
    }
  }
  size_t first;
  if (action.kind == Action::Kind::ReduceK) {
    first = stack.size() - static_cast<size_t>(action.k);
  } else if (config.system == SystemKind::InOrder) {
    first = open - 1;
  } else {
    first = open + 1;
  }
  int start = 0, end = 0;
  bool seen = false;
  for (size_t i = first; i < stack.size(); ++i) {
    if (!stack[i].is_subtree()) continue;
    if (!seen) {
      start = stack[i].node->span_start();
      seen = true;
    }
    end = stack[i].node->span_end();
  }
  return {start, end};
}

}  // namespace

MaskPair update_masks(const MaskPair& masks, const Action& action,
                      const Configuration& config_before) {
  if (!(masks == masks_for_config(config_before))) {
    throw InconsistentMaskError("mask pair is out of sync with the configuration");
  }
  MaskPair next = masks;
  switch (action.kind) {
    case Action::Kind::Shift: {
      const int pos = config_before.buffer_cursor;
      next.buffer_mask[pos - 1] = false;
      next.stack_mask[pos - 1] = true;
      break;
    }
    case Action::Kind::Reduce:
    case Action::Kind::ReduceK: {
      // Every constituent dominates >= 1 token, so the span is never empty
      // and the leftmost position always stays set as the representative.
      auto [start, end] = reduced_span(config_before, action);
      for (int p = start + 1; p <= end; ++p) next.stack_mask[p - 1] = false;
      break;
    }
    case Action::Kind::NonTerminal:
    case Action::Kind::Finish:
      break;
  }
  return next;
}

std::string format_mask_step(int step, const MaskPair& masks) {
  auto join = [](const std::vector<int>& v) {
    std::string s = "{";
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(v[i]);
    }
    return s + "}";
  };
  return "t" + std::to_string(step) + " S=" + join(masks.stack_positions()) +
         " B=" + join(masks.buffer_positions());
}

}  // namespace topshift
