#include "topshift/metrics.hpp"

#include <map>
#include <random>

#include "doctest.h"
#include "helpers.hpp"

using namespace topshift;
using test_helpers::kFigureFlat;

namespace {

// Relabels the index-th constituent (pre-order) with a fresh label of the
// same kind; used to build controlled prediction/gold pairs.
NodePtr relabel(const NodePtr& node, int& index, int target, const std::string& fresh) {
  if (node->is_token()) return node;
  Label label = node->label();
  if (index++ == target) label.name = fresh;
  std::vector<NodePtr> children;
  for (const auto& c : node->children()) children.push_back(relabel(c, index, target, fresh));
  return Node::constituent(label, children);
}

TopTree relabel_tree(const TopTree& tree, int target, const std::string& fresh) {
  int index = 0;
  return TopTree(relabel(tree.root(), index, target, fresh), tree.utterance());
}

// Independent scoring oracle: multiset counts via a map, precision/recall by
// summed intersections.
struct BruteCounts {
  std::map<std::string, int> items;
  void add(const std::string& s) { items[s] += 1; }
};

void brute_collect(const NodePtr& node, bool subtree_mode, BruteCounts& out) {
  if (node->is_token()) return;
  if (subtree_mode) {
    out.add(std::to_string(node->span_start()) + "|" + serialize_node(node));
  } else {
    out.add(node->label().str() + "|" + std::to_string(node->span_start()) + "|" +
            std::to_string(node->span_end()));
  }
  for (const auto& c : node->children()) brute_collect(c, subtree_mode, out);
}

PrecisionRecallF1 brute_prf(const std::vector<TopTree>& preds, const std::vector<TopTree>& golds,
                            bool subtree_mode) {
  int matched = 0, p_total = 0, g_total = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    BruteCounts p, g;
    brute_collect(preds[i].root(), subtree_mode, p);
    brute_collect(golds[i].root(), subtree_mode, g);
    for (const auto& [item, count] : p.items) {
      p_total += count;
      auto it = g.items.find(item);
      if (it != g.items.end()) matched += std::min(count, it->second);
    }
    for (const auto& [item, count] : g.items) g_total += count;
  }
  PrecisionRecallF1 r;
  r.precision = p_total ? static_cast<double>(matched) / p_total : 0.0;
  r.recall = g_total ? static_cast<double>(matched) / g_total : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

}  // namespace

TEST_CASE("exact match counts identical canonical serializations") {
  TopTree a = parse_tree(kFigureFlat);
  TopTree b = parse_tree("[IN:X hi ]");
  TopTree c = parse_tree("[IN:Y hi ]");
  CHECK(exact_match({a, b}, {a, b}) == 1.0);
  CHECK(exact_match({a, b}, {b, a}) == 0.0);
  CHECK(exact_match({a, b, c}, {a, b, b}) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK_THROWS_AS(exact_match({a}, {a, b}), LengthMismatchError);
}

TEST_CASE("labeled bracketing F1 on the relabeled-artist perturbation") {
  TopTree gold = parse_tree(kFigureFlat);
  CHECK(labeled_bracketing_f1({gold}, {gold}).f1 == 1.0);

  TopTree pred = relabel_tree(gold, 2, "OTHER");  // SL:MUSIC_ARTIST_NAME renamed
  auto prf = labeled_bracketing_f1({pred}, {gold});
  CHECK(prf.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(prf.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(prf.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-9));

  // No overlap at all: F1 = 0 without division errors.
  TopTree other = parse_tree("[IN:Z zz ]");
  CHECK(labeled_bracketing_f1({other}, {gold}).f1 == 0.0);
}

TEST_CASE("tree-labeled F1 counts whole subtrees") {
  TopTree gold = parse_tree(kFigureFlat);
  CHECK(tree_labeled_f1({gold}, {gold}).f1 == 1.0);

  // Relabeling the artist slot breaks that subtree and the root subtree.
  TopTree pred = relabel_tree(gold, 2, "OTHER");
  auto prf = tree_labeled_f1({pred}, {gold});
  CHECK(prf.precision == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(prf.recall == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(prf.f1 == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("metric implementations match the brute-force multiset oracle") {
  std::mt19937_64 rng(31);
  test_helpers::RandomTreeGen gen(rng);
  std::vector<TopTree> preds, golds;
  for (int i = 0; i < 300; ++i) {
    TopTree gold = gen.tree();
    auto stats = tree_stats(gold);
    const int constituents = stats.intent_count + stats.slot_count;
    TopTree pred = i % 3 == 0 ? gold
                              : relabel_tree(gold,
                                             std::uniform_int_distribution<int>(
                                                 0, constituents - 1)(rng),
                                             "PERTURBED");
    preds.push_back(pred);
    golds.push_back(gold);
  }
  auto f1 = labeled_bracketing_f1(preds, golds);
  auto bf1 = brute_prf(preds, golds, false);
  CHECK(f1.precision == doctest::Approx(bf1.precision).epsilon(1e-12));
  CHECK(f1.recall == doctest::Approx(bf1.recall).epsilon(1e-12));
  CHECK(f1.f1 == doctest::Approx(bf1.f1).epsilon(1e-12));

  auto tf1 = tree_labeled_f1(preds, golds);
  auto btf1 = brute_prf(preds, golds, true);
  CHECK(tf1.f1 == doctest::Approx(btf1.f1).epsilon(1e-12));

  // Subtree match implies labeled-span match.
  CHECK(tf1.f1 <= f1.f1 + 1e-12);
  CHECK(tf1.precision <= f1.precision + 1e-12);
}

TEST_CASE("EM=1 implies F1=1 implies TF1=1") {
  std::mt19937_64 rng(37);
  test_helpers::RandomTreeGen gen(rng);
  std::vector<TopTree> trees;
  for (int i = 0; i < 50; ++i) trees.push_back(gen.tree());
  CHECK(exact_match(trees, trees) == 1.0);
  CHECK(labeled_bracketing_f1(trees, trees).f1 == 1.0);
  CHECK(tree_labeled_f1(trees, trees).f1 == 1.0);
}

TEST_CASE("breakdown report bins and identities") {
  // All 1-intent trees correct, the 2-intent tree wrong.
  TopTree g1 = parse_tree("[IN:A x ]");
  TopTree g2 = parse_tree("[IN:B [SL:S [IN:A y ] ] ]");
  TopTree p2 = parse_tree("[IN:B [SL:T [IN:A y ] ] ]");
  auto report = breakdown_report({g1, p2}, {g1, g2}, {BreakdownAxis::IntentsPerUtterance});
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].bin == "1");
  CHECK(report.rows[0].em == 1.0);
  CHECK(report.rows[1].bin == "2");
  CHECK(report.rows[1].em == 0.0);

  // Per-bin weighted EM equals corpus EM.
  std::mt19937_64 rng(41);
  test_helpers::RandomTreeGen gen(rng);
  std::vector<TopTree> preds, golds;
  for (int i = 0; i < 60; ++i) {
    TopTree gold = gen.tree();
    golds.push_back(gold);
    preds.push_back(i % 2 ? gold : relabel_tree(gold, 0, "X"));
  }
  auto by_len = breakdown_report(preds, golds, {BreakdownAxis::UtteranceLengthBins});
  double weighted = 0.0;
  int total = 0;
  for (const auto& row : by_len.rows) {
    weighted += row.em * row.count;
    total += row.count;
  }
  CHECK(total == 60);
  CHECK(weighted / total == doctest::Approx(exact_match(preds, golds)).epsilon(1e-12));

  CHECK_THROWS_AS(axis_from_name("bogus"), UnknownAxisError);

  auto labels = breakdown_report(preds, golds, {BreakdownAxis::NonTerminalLabel});
  CHECK(!labels.rows.empty());
  auto spans = breakdown_report(preds, golds, {BreakdownAxis::SpanLengthBins});
  CHECK(!spans.rows.empty());
  CHECK(!labels.tsv().empty());
}
