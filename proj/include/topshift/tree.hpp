#pragma once

// TOP tree data model: utterances, intent/slot labels, nodes, bracketed
// serialization and structural validity checking.
//
// Trees are immutable values built from shared nodes, so configurations and
// beam hypotheses can share subtrees freely across threads.

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace topshift {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised by parse_tree / Utterance construction. `kind` names the contract
// violated; `what()` carries the human-readable detail.
struct TreeError : Error {
  enum class Kind {
    UnbalancedBrackets,
    UnknownLabelPrefix,
    InvalidTopStructure,
    EmptyConstituent,
    EmptyUtterance,
    InvalidToken,
  };
  TreeError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
  Kind kind;
};

enum class LabelKind { Intent, Slot };

// Non-terminal label. Serialized as IN:<name> or SL:<name>; names are
// uppercase alphanumeric/underscore and nonempty.
struct Label {
  LabelKind kind = LabelKind::Intent;
  std::string name;

  static Label intent(std::string n) { return {LabelKind::Intent, std::move(n)}; }
  static Label slot(std::string n) { return {LabelKind::Slot, std::move(n)}; }

  // Parses "IN:X" / "SL:X"; throws TreeError on bad prefix or name.
  static Label parse(const std::string& text);
  static bool is_valid_name(const std::string& n);

  std::string str() const { return (kind == LabelKind::Intent ? "IN:" : "SL:") + name; }

  bool operator==(const Label& o) const { return kind == o.kind && name == o.name; }
  bool operator!=(const Label& o) const { return !(*this == o); }
  bool operator<(const Label& o) const {
    if (kind != o.kind) return kind == LabelKind::Intent;
    return name < o.name;
  }
};

// Token sequence with 1-based positions. Tokens are nonempty, contain no
// whitespace and no bracket characters.
class Utterance {
 public:
  Utterance() = default;
  explicit Utterance(std::vector<std::string> tokens);

  // Whitespace-tokenizes `text`; throws on empty result or bad tokens.
  static Utterance tokenize(const std::string& text);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int position) const { return tokens_.at(position - 1); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::string str() const;

  bool operator==(const Utterance& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
};

class Node;
using NodePtr = std::shared_ptr<const Node>;

// Tree node: either a token leaf (position + word) or a labeled constituent
// over a nonempty, span-contiguous child sequence.
class Node {
 public:
  static NodePtr token(int position, std::string word);
  // Throws TreeError::EmptyConstituent on empty children and
  // InvalidTopStructure if the children's spans are not contiguous.
  static NodePtr constituent(Label label, std::vector<NodePtr> children);

  bool is_token() const { return is_token_; }
  bool is_constituent() const { return !is_token_; }
  bool is_intent() const { return !is_token_ && label_.kind == LabelKind::Intent; }
  bool is_slot() const { return !is_token_ && label_.kind == LabelKind::Slot; }

  const Label& label() const { return label_; }
  int position() const { return span_start_; }
  const std::string& word() const { return word_; }
  const std::vector<NodePtr>& children() const { return children_; }

  // Covered token positions, 1-based inclusive.
  int span_start() const { return span_start_; }
  int span_end() const { return span_end_; }
  int span_length() const { return span_end_ - span_start_ + 1; }

  // Structural equality (labels, words and positions).
  static bool equal(const Node& a, const Node& b);

 private:
  Node() = default;
  bool is_token_ = true;
  Label label_;
  std::string word_;
  std::vector<NodePtr> children_;
  int span_start_ = 0;
  int span_end_ = 0;
};

struct Violation {
  std::string rule;  // short rule id, e.g. "root-not-intent"
  std::string path;  // node path, e.g. "root.2.0"
  std::string detail;
};

struct ValidityReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string str() const;
};

// Checks the four TOP invariants plus span contiguity against `utterance`:
// root intent spanning 1..n, intent children are tokens/slots, slot children
// are words xor a single intent, leaves equal the utterance.
ValidityReport validate_tree(const NodePtr& root, const Utterance& utterance);

// A validated TOP tree. Construction enforces validate_tree.
class TopTree {
 public:
  TopTree(NodePtr root, Utterance utterance);

  const NodePtr& root() const { return root_; }
  const Utterance& utterance() const { return utterance_; }

  bool operator==(const TopTree& o) const;

 private:
  NodePtr root_;
  Utterance utterance_;
};

// Parses the bracketed TOP format, e.g.
//   [IN:PLAY_MUSIC Play [SL:MUSIC_TRACK_TITLE Paradise ] ]
// The result always satisfies the TopTree invariants.
TopTree parse_tree(const std::string& text);

// Canonical form: single spaces, every `]` preceded by a space.
// parse_tree(serialize_tree(t)) == t, byte-identical on canonical input.
std::string serialize_tree(const TopTree& tree);
std::string serialize_node(const NodePtr& node);

struct SpanInfo {
  Label label;
  int start = 0;
  int end = 0;
  int length = 0;
};

struct TreeStats {
  int depth = 0;  // edges from root to the deepest leaf
  int intent_count = 0;
  int slot_count = 0;
  bool is_compositional = false;  // depth > 2
  std::vector<SpanInfo> spans;    // one per constituent, pre-order
};

TreeStats tree_stats(const TopTree& tree);

}  // namespace topshift
