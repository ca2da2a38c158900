#include "topshift/transitions.hpp"

#include <algorithm>
#include <sstream>

namespace topshift {

const char* system_name(SystemKind system) {
  switch (system) {
    case SystemKind::TopDown: return "topdown";
    case SystemKind::BottomUp: return "bottomup";
    case SystemKind::InOrder: return "inorder";
  }
  return "?";
}

std::optional<SystemKind> system_from_name(const std::string& name) {
  if (name == "topdown" || name == "top-down") return SystemKind::TopDown;
  if (name == "bottomup" || name == "bottom-up") return SystemKind::BottomUp;
  if (name == "inorder" || name == "in-order") return SystemKind::InOrder;
  return std::nullopt;
}

std::string StackItem::str() const {
  if (is_open()) return label.str();
  if (node->is_token()) return node->word();
  return serialize_node(node);
}

std::string Configuration::str() const {
  std::string out = "[ ";
  for (size_t i = 0; i < stack.size(); ++i) {
    if (i) out += ", ";
    out += stack[i].str();
  }
  out += " ] / [ ";
  for (int p = buffer_cursor; p <= n(); ++p) {
    if (p != buffer_cursor) out += ", ";
    out += utterance->token(p);
  }
  out += " ]";
  if (system != SystemKind::TopDown) out += finished ? " f=true" : " f=false";
  return out;
}

std::string Action::str() const {
  switch (kind) {
    case Kind::Shift: return "SHIFT";
    case Kind::NonTerminal: return "NT(" + label.str() + ")";
    case Kind::Reduce: return "REDUCE";
    case Kind::ReduceK: return "REDUCE#" + std::to_string(k) + "(" + label.str() + ")";
    case Kind::Finish: return "FINISH";
  }
  return "?";
}

Action Action::parse(const std::string& text) {
  if (text == "SHIFT") return shift();
  if (text == "REDUCE") return reduce();
  if (text == "FINISH") return finish();
  auto parse_label_arg = [&](size_t open_pos) {
    if (text.back() != ')') {
      throw TransitionError("malformed action '" + text + "'");
    }
    return Label::parse(text.substr(open_pos + 1, text.size() - open_pos - 2));
  };
  if (text.rfind("NT(", 0) == 0) {
    return non_terminal(parse_label_arg(2));
  }
  if (text.rfind("REDUCE#", 0) == 0) {
    size_t open_pos = text.find('(');
    if (open_pos == std::string::npos) {
      throw TransitionError("malformed action '" + text + "'");
    }
    int k = 0;
    try {
      k = std::stoi(text.substr(7, open_pos - 7));
    } catch (const std::exception&) {
      throw TransitionError("malformed arity in action '" + text + "'");
    }
    if (k < 1) throw TransitionError("REDUCE#k requires k >= 1 in '" + text + "'");
    return reduce_k(k, parse_label_arg(open_pos));
  }
  throw TransitionError("unknown action '" + text + "'");
}

bool action_order_less(const Action& a, const Action& b) {
  auto rank = [](const Action& x) {
    switch (x.kind) {
      case Action::Kind::Shift: return 0;
      case Action::Kind::Reduce: return 1;
      case Action::Kind::Finish: return 2;
      case Action::Kind::NonTerminal: return 3;
      case Action::Kind::ReduceK: return 4;
    }
    return 5;
  };
  if (rank(a) != rank(b)) return rank(a) < rank(b);
  if (a.kind == Action::Kind::NonTerminal) return a.label < b.label;
  if (a.kind == Action::Kind::ReduceK) {
    if (a.k != b.k) return a.k > b.k;  // larger reductions first
    return a.label < b.label;
  }
  return false;
}

std::vector<Action> parse_action_sequence(const std::string& line) {
  std::istringstream in(line);
  std::vector<Action> actions;
  std::string tok;
  while (in >> tok) actions.push_back(Action::parse(tok));
  return actions;
}

std::string format_action_sequence(const std::vector<Action>& actions) {
  std::string out;
  for (size_t i = 0; i < actions.size(); ++i) {
    if (i) out += ' ';
    out += actions[i].str();
  }
  return out;
}

void LabelVocab::add(const Label& label) {
  auto& v = label.kind == LabelKind::Intent ? intents : slots;
  auto it = std::lower_bound(v.begin(), v.end(), label);
  if (it == v.end() || *it != label) v.insert(it, label);
}

bool LabelVocab::contains(const Label& label) const {
  const auto& v = label.kind == LabelKind::Intent ? intents : slots;
  return std::binary_search(v.begin(), v.end(), label);
}

Configuration init_config(const Utterance& utterance, SystemKind system) {
  return init_config(std::make_shared<const Utterance>(utterance), system);
}

Configuration init_config(std::shared_ptr<const Utterance> utterance, SystemKind system) {
  if (!utterance || utterance->size() == 0) {
    throw EmptyUtteranceError("cannot initialize a configuration over an empty utterance");
  }
  Configuration c;
  c.system = system;
  c.utterance = std::move(utterance);
  c.buffer_cursor = 1;
  c.finished = false;
  return c;
}

namespace {

// Index of the last Open item, if any.
std::optional<size_t> topmost_open(const std::vector<StackItem>& stack) {
  for (size_t i = stack.size(); i-- > 0;) {
    if (stack[i].is_open()) return i;
  }
  return std::nullopt;
}

bool single_intent_stack(const Configuration& c) {
  return c.stack.size() == 1 && c.stack[0].is_intent_subtree();
}

std::optional<std::string> top_down_reason(const Configuration& c, const Action& a) {
  const auto open = topmost_open(c.stack);
  switch (a.kind) {
    case Action::Kind::Shift:
      if (c.buffer_empty()) return "SHIFT requires a nonempty buffer";
      if (c.stack.empty()) return "SHIFT before the first non-terminal would strand the token";
      if (open && c.stack[*open].is_open_slot()) {
        for (size_t i = *open + 1; i < c.stack.size(); ++i) {
          if (c.stack[i].is_intent_subtree()) {
            return "SHIFT into a slot that already holds an intent child";
          }
        }
      }
      return std::nullopt;
    case Action::Kind::NonTerminal:
      if (a.label.kind == LabelKind::Intent) {
        if (c.stack.empty()) return std::nullopt;
        if (c.stack.back().is_open_slot()) return std::nullopt;
        return "an intent non-terminal may only start the parse or directly follow a "
               "slot non-terminal";
      }
      if (!open || !c.stack[*open].is_open_intent()) {
        return "a slot non-terminal requires the last open non-terminal to be an intent";
      }
      return std::nullopt;
    case Action::Kind::Reduce: {
      if (!open) return "REDUCE requires an open non-terminal on the stack";
      if (*open + 1 == c.stack.size()) {
        return "REDUCE requires at least one item above the open non-terminal";
      }
      bool bottom_most = true;
      for (size_t i = 0; i < *open; ++i) {
        if (c.stack[i].is_open()) {
          bottom_most = false;
          break;
        }
      }
      if (bottom_most && !c.buffer_empty()) {
        return "reducing the bottom-most open non-terminal would strand buffer tokens";
      }
      return std::nullopt;
    }
    case Action::Kind::ReduceK:
      return "REDUCE#k does not exist in the top-down system";
    case Action::Kind::Finish:
      return "FINISH does not exist in the top-down system";
  }
  return "unknown action";
}

std::optional<std::string> bottom_up_reason(const Configuration& c, const Action& a) {
  switch (a.kind) {
    case Action::Kind::Shift:
      if (c.buffer_empty()) return "SHIFT requires a nonempty buffer";
      if (!c.stack.empty() && c.stack.back().is_intent_subtree()) {
        return "SHIFT on top of an intent constituent (the slot above it must be built first)";
      }
      return std::nullopt;
    case Action::Kind::ReduceK: {
      if (a.k < 1 || a.k > static_cast<int>(c.stack.size())) {
        return "REDUCE#k requires 1 <= k <= stack size";
      }
      const size_t first = c.stack.size() - static_cast<size_t>(a.k);
      for (size_t i = first; i < c.stack.size(); ++i) {
        if (c.stack[i].is_open()) return "REDUCE#k over an open non-terminal";
      }
      if (a.label.kind == LabelKind::Intent) {
        for (size_t i = first; i < c.stack.size(); ++i) {
          if (c.stack[i].is_intent_subtree()) {
            return "an intent constituent cannot take another intent as a child";
          }
        }
      } else {
        for (size_t i = first; i < c.stack.size(); ++i) {
          if (c.stack[i].is_slot_subtree()) {
            return "a slot constituent cannot take another slot as a child";
          }
        }
        if (c.stack.back().is_intent_subtree() && a.k != 1) {
          return "a slot over an intent child must reduce exactly that one item";
        }
      }
      return std::nullopt;
    }
    case Action::Kind::Finish:
      if (!c.buffer_empty()) return "FINISH requires an empty buffer";
      if (!single_intent_stack(c)) {
        return "FINISH requires the stack to hold a single intent constituent";
      }
      return std::nullopt;
    case Action::Kind::NonTerminal:
      return "NT does not exist in the bottom-up system";
    case Action::Kind::Reduce:
      return "plain REDUCE does not exist in the bottom-up system";
  }
  return "unknown action";
}

std::optional<std::string> in_order_reason(const Configuration& c, const Action& a) {
  const auto open = topmost_open(c.stack);
  switch (a.kind) {
    case Action::Kind::Shift:
      if (c.buffer_empty()) return "SHIFT requires a nonempty buffer";
      if (open && c.stack[*open].is_open_slot() && *open > 0 &&
          c.stack[*open - 1].is_intent_subtree()) {
        return "SHIFT into a slot whose first child is an intent constituent";
      }
      return std::nullopt;
    case Action::Kind::NonTerminal:
      if (c.stack.empty() || !c.stack.back().is_subtree()) {
        return "NT requires the future constituent's first child completed on top of the stack";
      }
      if (a.label.kind == LabelKind::Intent && c.stack.back().is_intent_subtree()) {
        return "an intent non-terminal cannot take an intent as its first child";
      }
      if (a.label.kind == LabelKind::Slot && c.stack.back().is_slot_subtree()) {
        return "a slot non-terminal cannot take a slot as its first child";
      }
      return std::nullopt;
    case Action::Kind::Reduce: {
      if (!open) return "REDUCE requires an open non-terminal on the stack";
      if (*open == 0 || !c.stack[*open - 1].is_subtree()) {
        return "REDUCE requires the completed first child beneath the open non-terminal";
      }
      const bool intent_nt = c.stack[*open].is_open_intent();
      for (size_t i = *open + 1; i < c.stack.size(); ++i) {
        if (intent_nt) {
          if (c.stack[i].is_intent_subtree()) {
            return "an intent constituent cannot take another intent as a child";
          }
        } else {
          // Slot children above the NT must all be tokens: a slot holds
          // either words or one intent (which can only be the first child).
          if (!c.stack[i].is_token()) {
            return "a slot constituent admits only token children after its first child";
          }
        }
      }
      if (!intent_nt && c.stack[*open - 1].is_intent_subtree() &&
          *open + 1 != c.stack.size()) {
        return "a slot over an intent child must contain exactly that intent";
      }
      return std::nullopt;
    }
    case Action::Kind::Finish:
      if (!c.buffer_empty()) return "FINISH requires an empty buffer";
      if (!single_intent_stack(c)) {
        return "FINISH requires the stack to hold a single intent constituent";
      }
      return std::nullopt;
    case Action::Kind::ReduceK:
      return "REDUCE#k does not exist in the in-order system";
  }
  return "unknown action";
}

}  // namespace

bool is_final(const Configuration& config) {
  if (config.system == SystemKind::TopDown) {
    return config.buffer_empty() && single_intent_stack(config) &&
           config.stack[0].node->span_start() == 1 &&
           config.stack[0].node->span_end() == config.n();
  }
  return config.finished;
}

std::optional<std::string> illegality_reason(const Configuration& config, const Action& action) {
  if (is_final(config)) return "configuration is final";
  switch (config.system) {
    case SystemKind::TopDown: return top_down_reason(config, action);
    case SystemKind::BottomUp: return bottom_up_reason(config, action);
    case SystemKind::InOrder: return in_order_reason(config, action);
  }
  return "unknown system";
}

std::vector<Action> legal_actions(const Configuration& config, const LabelVocab& label_vocab) {
  if (is_final(config)) {
    throw FinalConfigurationError("legal_actions on a final configuration");
  }
  auto legal = [&](const Action& a) { return !illegality_reason(config, a).has_value(); };
  std::vector<Action> out;
  if (legal(Action::shift())) out.push_back(Action::shift());
  if (config.system != SystemKind::BottomUp && legal(Action::reduce())) {
    out.push_back(Action::reduce());
  }
  if (config.system != SystemKind::TopDown && legal(Action::finish())) {
    out.push_back(Action::finish());
  }
  if (config.system != SystemKind::BottomUp) {
    for (const auto& l : label_vocab.intents) {
      if (legal(Action::non_terminal(l))) out.push_back(Action::non_terminal(l));
    }
    for (const auto& l : label_vocab.slots) {
      if (legal(Action::non_terminal(l))) out.push_back(Action::non_terminal(l));
    }
  } else {
    for (int k = static_cast<int>(config.stack.size()); k >= 1; --k) {
      for (const auto& l : label_vocab.intents) {
        if (legal(Action::reduce_k(k, l))) out.push_back(Action::reduce_k(k, l));
      }
      for (const auto& l : label_vocab.slots) {
        if (legal(Action::reduce_k(k, l))) out.push_back(Action::reduce_k(k, l));
      }
    }
  }
  return out;
}

Configuration apply_action(const Configuration& config, const Action& action) {
  if (auto reason = illegality_reason(config, action)) {
    throw IllegalActionError(action.str() + " is illegal: " + *reason);
  }
  Configuration next = config;
  switch (action.kind) {
    case Action::Kind::Shift:
      next.stack.push_back(StackItem::subtree(
          Node::token(config.buffer_cursor, config.utterance->token(config.buffer_cursor))));
      next.buffer_cursor += 1;
      break;
    case Action::Kind::NonTerminal:
      next.stack.push_back(StackItem::open(action.label));
      break;
    case Action::Kind::Reduce: {
      const size_t open = *topmost_open(next.stack);
      // In-order additionally pops the first child sitting beneath the NT.
      const size_t base = config.system == SystemKind::InOrder ? open - 1 : open;
      std::vector<NodePtr> children;
      for (size_t i = base; i < next.stack.size(); ++i) {
        if (i != open) children.push_back(next.stack[i].node);
      }
      Label label = next.stack[open].label;
      next.stack.resize(base);
      next.stack.push_back(
          StackItem::subtree(Node::constituent(std::move(label), std::move(children))));
      break;
    }
    case Action::Kind::ReduceK: {
      const size_t first = next.stack.size() - static_cast<size_t>(action.k);
      std::vector<NodePtr> children;
      for (size_t i = first; i < next.stack.size(); ++i) {
        children.push_back(next.stack[i].node);
      }
      next.stack.resize(first);
      next.stack.push_back(
          StackItem::subtree(Node::constituent(action.label, std::move(children))));
      break;
    }
    case Action::Kind::Finish:
      next.finished = true;
      break;
  }
  return next;
}

TopTree execute(const Utterance& utterance, const std::vector<Action>& actions,
                SystemKind system) {
  Configuration config = init_config(utterance, system);
  for (size_t step = 0; step < actions.size(); ++step) {
    if (auto reason = illegality_reason(config, actions[step])) {
      throw IllegalActionError("step " + std::to_string(step) + ": " + actions[step].str() +
                                   " is illegal: " + *reason,
                               static_cast<int>(step));
    }
    config = apply_action(config, actions[step]);
  }
  if (!is_final(config)) {
    throw NotFinalError("action sequence exhausted before a final configuration");
  }
  return TopTree(config.stack[0].node, utterance);
}

}  // namespace topshift
