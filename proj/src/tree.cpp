#include "topshift/tree.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace topshift {

namespace {

bool has_bracket(const std::string& s) {
  return s.find_first_of("[]") != std::string::npos;
}

std::string child_path(const std::string& base, size_t index) {
  return base + "." + std::to_string(index);
}

}  // namespace

bool Label::is_valid_name(const std::string& n) {
  if (n.empty()) return false;
  for (char c : n) {
    if (!(std::isupper(static_cast<unsigned char>(c)) ||
          std::isdigit(static_cast<unsigned char>(c)) || c == '_')) {
      return false;
    }
  }
  return true;
}

Label Label::parse(const std::string& text) {
  LabelKind kind;
  if (text.rfind("IN:", 0) == 0) {
    kind = LabelKind::Intent;
  } else if (text.rfind("SL:", 0) == 0) {
    kind = LabelKind::Slot;
  } else {
    throw TreeError(TreeError::Kind::UnknownLabelPrefix,
                    "label '" + text + "' has neither IN: nor SL: prefix");
  }
  std::string name = text.substr(3);
  if (!is_valid_name(name)) {
    throw TreeError(TreeError::Kind::UnknownLabelPrefix,
                    "label name '" + name + "' is not uppercase alphanumeric/underscore");
  }
  return {kind, std::move(name)};
}

Utterance::Utterance(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) {
    throw TreeError(TreeError::Kind::EmptyUtterance, "utterance has no tokens");
  }
  for (const auto& t : tokens_) {
    if (t.empty()) {
      throw TreeError(TreeError::Kind::InvalidToken, "empty token");
    }
    if (has_bracket(t)) {
      throw TreeError(TreeError::Kind::InvalidToken,
                      "token '" + t + "' contains a bracket character");
    }
    if (t.find_first_of(" \t\r\n") != std::string::npos) {
      throw TreeError(TreeError::Kind::InvalidToken, "token contains whitespace");
    }
  }
}

Utterance Utterance::tokenize(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> toks;
  std::string t;
  while (in >> t) toks.push_back(t);
  return Utterance(std::move(toks));
}

std::string Utterance::str() const {
  std::string out;
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (i) out += ' ';
    out += tokens_[i];
  }
  return out;
}

NodePtr Node::token(int position, std::string word) {
  auto n = std::shared_ptr<Node>(new Node());
  n->is_token_ = true;
  n->word_ = std::move(word);
  n->span_start_ = n->span_end_ = position;
  return n;
}

NodePtr Node::constituent(Label label, std::vector<NodePtr> children) {
  if (children.empty()) {
    throw TreeError(TreeError::Kind::EmptyConstituent,
                    "constituent " + label.str() + " has no children");
  }
  auto n = std::shared_ptr<Node>(new Node());
  n->is_token_ = false;
  n->label_ = std::move(label);
  n->span_start_ = children.front()->span_start();
  n->span_end_ = children.back()->span_end();
  for (size_t i = 1; i < children.size(); ++i) {
    if (children[i]->span_start() != children[i - 1]->span_end() + 1) {
      throw TreeError(TreeError::Kind::InvalidTopStructure,
                      "children of " + n->label_.str() + " do not cover a contiguous span");
    }
  }
  n->children_ = std::move(children);
  return n;
}

bool Node::equal(const Node& a, const Node& b) {
  if (a.is_token_ != b.is_token_) return false;
  if (a.is_token_) return a.span_start_ == b.span_start_ && a.word_ == b.word_;
  if (a.label_ != b.label_ || a.children_.size() != b.children_.size()) return false;
  for (size_t i = 0; i < a.children_.size(); ++i) {
    if (!equal(*a.children_[i], *b.children_[i])) return false;
  }
  return true;
}

namespace {

void validate_node(const NodePtr& node, const std::string& path, ValidityReport& report) {
  if (node->is_token()) return;
  const auto& children = node->children();
  if (node->is_intent()) {
    for (size_t i = 0; i < children.size(); ++i) {
      const auto& c = children[i];
      if (c->is_intent()) {
        report.violations.push_back({"intent-child-of-intent", child_path(path, i),
                                     "intent " + node->label().str() +
                                         " has intent child " + c->label().str()});
      }
    }
  } else {
    // Slot: one or more token leaves, or exactly one intent constituent.
    size_t token_children = 0, intent_children = 0, slot_children = 0;
    for (const auto& c : children) {
      if (c->is_token()) {
        ++token_children;
      } else if (c->is_intent()) {
        ++intent_children;
      } else {
        ++slot_children;
      }
    }
    if (slot_children > 0) {
      report.violations.push_back(
          {"slot-child-of-slot", path, "slot " + node->label().str() + " has a slot child"});
    }
    if (intent_children > 1) {
      report.violations.push_back({"slot-multiple-intents", path,
                                   "slot " + node->label().str() + " has >1 intent child"});
    } else if (intent_children == 1 && children.size() > 1) {
      report.violations.push_back({"slot-mixed-children", path,
                                   "slot " + node->label().str() +
                                       " mixes an intent child with other children"});
    }
  }
  for (size_t i = 0; i < children.size(); ++i) {
    validate_node(children[i], child_path(path, i), report);
  }
}

void collect_leaves(const NodePtr& node, std::vector<const Node*>& leaves) {
  if (node->is_token()) {
    leaves.push_back(node.get());
    return;
  }
  for (const auto& c : node->children()) collect_leaves(c, leaves);
}

}  // namespace

ValidityReport validate_tree(const NodePtr& root, const Utterance& utterance) {
  ValidityReport report;
  if (!root) {
    report.violations.push_back({"missing-root", "root", "tree has no root"});
    return report;
  }
  if (root->is_token() || !root->is_intent()) {
    report.violations.push_back({"root-not-intent", "root", "root constituent must be an intent"});
  }
  const int n = utterance.size();
  if (root->span_start() != 1 || root->span_end() != n) {
    report.violations.push_back(
        {"root-span", "root",
         "root spans " + std::to_string(root->span_start()) + ".." +
             std::to_string(root->span_end()) + ", utterance has n=" + std::to_string(n)});
  }
  validate_node(root, "root", report);

  std::vector<const Node*> leaves;
  collect_leaves(root, leaves);
  bool leaf_mismatch = leaves.size() != static_cast<size_t>(n);
  if (!leaf_mismatch) {
    for (int i = 0; i < n; ++i) {
      if (leaves[i]->position() != i + 1 || leaves[i]->word() != utterance.token(i + 1)) {
        leaf_mismatch = true;
        break;
      }
    }
  }
  if (leaf_mismatch) {
    report.violations.push_back(
        {"leaf-mismatch", "root", "in-order leaves do not equal the utterance tokens"});
  }
  return report;
}

std::string ValidityReport::str() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.rule + " at " + v.path + ": " + v.detail;
  }
  return out;
}

TopTree::TopTree(NodePtr root, Utterance utterance)
    : root_(std::move(root)), utterance_(std::move(utterance)) {
  auto report = validate_tree(root_, utterance_);
  if (!report.ok()) {
    throw TreeError(TreeError::Kind::InvalidTopStructure, report.str());
  }
}

bool TopTree::operator==(const TopTree& o) const {
  return utterance_ == o.utterance_ && Node::equal(*root_, *o.root_);
}

namespace {

struct TreeParser {
  std::vector<std::string> items;
  size_t pos = 0;
  int next_token_position = 1;

  bool done() const { return pos >= items.size(); }
  const std::string& peek() const { return items[pos]; }

  NodePtr parse_constituent() {
    const std::string& open = items[pos++];
    Label label = Label::parse(open.substr(1));
    std::vector<NodePtr> children;
    while (true) {
      if (done()) {
        throw TreeError(TreeError::Kind::UnbalancedBrackets,
                        "missing ] for " + label.str());
      }
      const std::string& item = peek();
      if (item == "]") {
        ++pos;
        break;
      }
      if (item[0] == '[') {
        children.push_back(parse_constituent());
      } else {
        if (has_bracket(item)) {
          throw TreeError(TreeError::Kind::InvalidToken,
                          "token '" + item + "' contains a bracket character");
        }
        children.push_back(Node::token(next_token_position++, item));
        ++pos;
      }
    }
    return Node::constituent(std::move(label), std::move(children));
  }
};

}  // namespace

TopTree parse_tree(const std::string& text) {
  std::istringstream in(text);
  TreeParser parser;
  std::string item;
  while (in >> item) parser.items.push_back(item);
  if (parser.items.empty()) {
    throw TreeError(TreeError::Kind::UnbalancedBrackets, "empty input");
  }
  if (parser.items.front()[0] != '[') {
    throw TreeError(TreeError::Kind::InvalidTopStructure,
                    "input does not start with a constituent");
  }
  if (parser.items.front() == "[") {
    throw TreeError(TreeError::Kind::UnknownLabelPrefix, "bracket without a label");
  }
  NodePtr root = parser.parse_constituent();
  if (!parser.done()) {
    throw TreeError(TreeError::Kind::UnbalancedBrackets,
                    "trailing content after the root constituent closes");
  }
  std::vector<const Node*> leaves;
  collect_leaves(root, leaves);
  std::vector<std::string> tokens;
  tokens.reserve(leaves.size());
  for (const Node* leaf : leaves) tokens.push_back(leaf->word());
  return TopTree(root, Utterance(std::move(tokens)));
}

namespace {

void serialize_into(const NodePtr& node, std::string& out) {
  if (node->is_token()) {
    out += node->word();
    return;
  }
  out += '[';
  out += node->label().str();
  for (const auto& c : node->children()) {
    out += ' ';
    serialize_into(c, out);
  }
  out += " ]";
}

}  // namespace

std::string serialize_node(const NodePtr& node) {
  std::string out;
  serialize_into(node, out);
  return out;
}

std::string serialize_tree(const TopTree& tree) { return serialize_node(tree.root()); }

namespace {

int node_depth(const NodePtr& node) {
  if (node->is_token()) return 0;
  int best = 0;
  for (const auto& c : node->children()) best = std::max(best, node_depth(c));
  return best + 1;
}

void collect_stats(const NodePtr& node, TreeStats& stats) {
  if (node->is_token()) return;
  if (node->is_intent()) {
    ++stats.intent_count;
  } else {
    ++stats.slot_count;
  }
  stats.spans.push_back(
      {node->label(), node->span_start(), node->span_end(), node->span_length()});
  for (const auto& c : node->children()) collect_stats(c, stats);
}

}  // namespace

TreeStats tree_stats(const TopTree& tree) {
  TreeStats stats;
  stats.depth = node_depth(tree.root());
  collect_stats(tree.root(), stats);
  stats.is_compositional = stats.depth > 2;
  return stats;
}

}  // namespace topshift
