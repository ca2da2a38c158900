#pragma once

// The three shift-reduce transition systems for TOP parsing: top-down,
// non-binary bottom-up and in-order, as executable state machines with
// complete legality checking.
//
// Configurations are immutable values; apply_action returns a fresh
// configuration and subtrees are shared, so beam expansion can copy freely.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "topshift/tree.hpp"

namespace topshift {

enum class SystemKind { TopDown, BottomUp, InOrder };

const char* system_name(SystemKind system);
std::optional<SystemKind> system_from_name(const std::string& name);

struct TransitionError : Error {
  using Error::Error;
};
struct EmptyUtteranceError : TransitionError {
  using TransitionError::TransitionError;
};
struct FinalConfigurationError : TransitionError {
  using TransitionError::TransitionError;
};
// what() names the violated constraint; `step` is set by execute().
struct IllegalActionError : TransitionError {
  IllegalActionError(const std::string& msg, int step_index = -1)
      : TransitionError(msg), step(step_index) {}
  int step;
};
struct NotFinalError : TransitionError {
  using TransitionError::TransitionError;
};

// Stack entry: an open non-terminal awaiting its Reduce, or a completed
// item (token leaf or constituent subtree).
struct StackItem {
  enum class Kind { Open, Subtree };
  Kind kind = Kind::Subtree;
  Label label;   // Open only
  NodePtr node;  // Subtree only

  static StackItem open(Label l) { return {Kind::Open, std::move(l), nullptr}; }
  static StackItem subtree(NodePtr n) { return {Kind::Subtree, {}, std::move(n)}; }

  bool is_open() const { return kind == Kind::Open; }
  bool is_subtree() const { return kind == Kind::Subtree; }
  bool is_open_intent() const { return is_open() && label.kind == LabelKind::Intent; }
  bool is_open_slot() const { return is_open() && label.kind == LabelKind::Slot; }
  bool is_intent_subtree() const { return is_subtree() && node->is_intent(); }
  bool is_slot_subtree() const { return is_subtree() && node->is_slot(); }
  bool is_token() const { return is_subtree() && node->is_token(); }

  std::string str() const;  // e.g. "IN:PLAY_MUSIC" (open) or "[SL:TITLE Paradise ]"
};

// Parser state c = <stack, buffer, finished>. The buffer is a cursor into
// the (shared) utterance: positions cursor..n are unread.
struct Configuration {
  SystemKind system = SystemKind::TopDown;
  std::shared_ptr<const Utterance> utterance;
  std::vector<StackItem> stack;
  int buffer_cursor = 1;  // next unread 1-based position, in [1, n+1]
  bool finished = false;  // never set for TopDown

  int n() const { return utterance->size(); }
  bool buffer_empty() const { return buffer_cursor > n(); }
  int buffer_size() const { return n() - buffer_cursor + 1; }
  std::string str() const;  // "[ item, item ] / [ tok, tok ] f=false"
};

// Transition: Shift | NonTerminal(L) | Reduce | ReduceK(k, L) | Finish.
// ReduceK only exists in BottomUp; Finish in BottomUp/InOrder; NonTerminal
// and plain Reduce in TopDown/InOrder.
struct Action {
  enum class Kind { Shift, NonTerminal, Reduce, ReduceK, Finish };
  Kind kind = Kind::Shift;
  Label label;  // NonTerminal, ReduceK
  int k = 0;    // ReduceK

  static Action shift() { return {Kind::Shift, {}, 0}; }
  static Action non_terminal(Label l) { return {Kind::NonTerminal, std::move(l), 0}; }
  static Action reduce() { return {Kind::Reduce, {}, 0}; }
  static Action reduce_k(int k, Label l) { return {Kind::ReduceK, std::move(l), k}; }
  static Action finish() { return {Kind::Finish, {}, 0}; }

  // Text format: SHIFT, NT(IN:X), REDUCE, REDUCE#4(IN:X), FINISH.
  std::string str() const;
  static Action parse(const std::string& text);

  bool operator==(const Action& o) const {
    return kind == o.kind && k == o.k && (kind == Kind::NonTerminal || kind == Kind::ReduceK
                                              ? label == o.label
                                              : true);
  }
  bool operator!=(const Action& o) const { return !(*this == o); }
};

// Fixed total order used for the action vocabulary and greedy tie-breaking:
// SHIFT < REDUCE < FINISH < NT(IN:) < NT(SL:) < REDUCE#k (k descending).
bool action_order_less(const Action& a, const Action& b);

std::vector<Action> parse_action_sequence(const std::string& line);
std::string format_action_sequence(const std::vector<Action>& actions);

// Label inventory used to instantiate parameterized actions.
struct LabelVocab {
  std::vector<Label> intents;  // sorted, unique
  std::vector<Label> slots;

  void add(const Label& label);
  bool contains(const Label& label) const;
  bool empty() const { return intents.empty() && slots.empty(); }
};

// Empty stack, full buffer. Throws EmptyUtteranceError on n = 0.
Configuration init_config(const Utterance& utterance, SystemKind system);
Configuration init_config(std::shared_ptr<const Utterance> utterance, SystemKind system);

// True in exactly the final configurations: TopDown structurally (buffer
// empty, stack = [one intent constituent spanning 1..n]); BottomUp/InOrder
// via the finished flag.
bool is_final(const Configuration& config);

// Returns the reason `action` is not applicable in `config`, or nullopt if
// it is legal. Pure legality; does not consult any label vocabulary.
std::optional<std::string> illegality_reason(const Configuration& config, const Action& action);

// All legal actions, instantiated over `label_vocab` (and, for ReduceK,
// k in [1, stack size]), in action_order_less order.
// Throws FinalConfigurationError if config is final.
std::vector<Action> legal_actions(const Configuration& config, const LabelVocab& label_vocab);

// Applies a legal action; throws IllegalActionError naming the violated
// constraint otherwise. Pure function of (config, action).
Configuration apply_action(const Configuration& config, const Action& action);

// Folds apply_action from init_config and returns the parse iff the end
// configuration is final. Throws IllegalActionError (with step set) or
// NotFinalError.
TopTree execute(const Utterance& utterance, const std::vector<Action>& actions,
                SystemKind system);

}  // namespace topshift
