#include "topshift/oracle.hpp"

namespace topshift {

namespace {

void top_down_visit(const NodePtr& node, std::vector<Action>& out) {
  if (node->is_token()) {
    out.push_back(Action::shift());
    return;
  }
  out.push_back(Action::non_terminal(node->label()));
  for (const auto& c : node->children()) top_down_visit(c, out);
  out.push_back(Action::reduce());
}

void bottom_up_visit(const NodePtr& node, std::vector<Action>& out) {
  if (node->is_token()) {
    out.push_back(Action::shift());
    return;
  }
  for (const auto& c : node->children()) bottom_up_visit(c, out);
  out.push_back(Action::reduce_k(static_cast<int>(node->children().size()), node->label()));
}

void in_order_visit(const NodePtr& node, std::vector<Action>& out) {
  if (node->is_token()) {
    out.push_back(Action::shift());
    return;
  }
  const auto& children = node->children();
  in_order_visit(children[0], out);
  out.push_back(Action::non_terminal(node->label()));
  for (size_t i = 1; i < children.size(); ++i) in_order_visit(children[i], out);
  out.push_back(Action::reduce());
}

}  // namespace

std::vector<Action> oracle_actions(const TopTree& tree, SystemKind system) {
  std::vector<Action> out;
  switch (system) {
    case SystemKind::TopDown:
      top_down_visit(tree.root(), out);
      break;
    case SystemKind::BottomUp:
      bottom_up_visit(tree.root(), out);
      out.push_back(Action::finish());
      break;
    case SystemKind::InOrder:
      in_order_visit(tree.root(), out);
      out.push_back(Action::finish());
      break;
  }
  return out;
}

}  // namespace topshift
