#include "topshift/metrics.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace topshift {

namespace {

void require_aligned(const std::vector<TopTree>& predictions, const std::vector<TopTree>& golds) {
  if (predictions.size() != golds.size()) {
    throw LengthMismatchError("predictions and golds differ in length (" +
                              std::to_string(predictions.size()) + " vs " +
                              std::to_string(golds.size()) + ")");
  }
}

void collect_brackets(const NodePtr& node, std::vector<std::string>& out) {
  if (node->is_token()) return;
  out.push_back(node->label().str() + "\t" + std::to_string(node->span_start()) + "\t" +
                std::to_string(node->span_end()));
  for (const auto& c : node->children()) collect_brackets(c, out);
}

void collect_subtrees(const NodePtr& node, std::vector<std::string>& out) {
  if (node->is_token()) return;
  out.push_back(std::to_string(node->span_start()) + "\t" + serialize_node(node));
  for (const auto& c : node->children()) collect_subtrees(c, out);
}

size_t multiset_intersection(std::vector<std::string> a, std::vector<std::string> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::string> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return common.size();
}

PrecisionRecallF1 micro_prf(size_t matched, size_t predicted, size_t gold) {
  PrecisionRecallF1 r;
  r.precision = predicted ? static_cast<double>(matched) / static_cast<double>(predicted) : 0.0;
  r.recall = gold ? static_cast<double>(matched) / static_cast<double>(gold) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

template <typename Collector>
PrecisionRecallF1 corpus_prf(const std::vector<TopTree>& predictions,
                             const std::vector<TopTree>& golds, Collector collect) {
  require_aligned(predictions, golds);
  size_t matched = 0, predicted = 0, gold_total = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    std::vector<std::string> p, g;
    collect(predictions[i].root(), p);
    collect(golds[i].root(), g);
    predicted += p.size();
    gold_total += g.size();
    matched += multiset_intersection(std::move(p), std::move(g));
  }
  return micro_prf(matched, predicted, gold_total);
}

}  // namespace

double exact_match(const std::vector<TopTree>& predictions, const std::vector<TopTree>& golds) {
  require_aligned(predictions, golds);
  if (predictions.empty()) return 0.0;
  size_t hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    if (serialize_tree(predictions[i]) == serialize_tree(golds[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

PrecisionRecallF1 labeled_bracketing_f1(const std::vector<TopTree>& predictions,
                                        const std::vector<TopTree>& golds) {
  return corpus_prf(predictions, golds, collect_brackets);
}

PrecisionRecallF1 tree_labeled_f1(const std::vector<TopTree>& predictions,
                                  const std::vector<TopTree>& golds) {
  return corpus_prf(predictions, golds, collect_subtrees);
}

BreakdownAxis axis_from_name(const std::string& name) {
  if (name == "utterance_length_bins") return BreakdownAxis::UtteranceLengthBins;
  if (name == "intents_per_utterance") return BreakdownAxis::IntentsPerUtterance;
  if (name == "span_length_bins") return BreakdownAxis::SpanLengthBins;
  if (name == "nonterminal_label") return BreakdownAxis::NonTerminalLabel;
  throw UnknownAxisError("unknown breakdown axis '" + name + "'");
}

const char* axis_name(BreakdownAxis axis) {
  switch (axis) {
    case BreakdownAxis::UtteranceLengthBins: return "utterance_length_bins";
    case BreakdownAxis::IntentsPerUtterance: return "intents_per_utterance";
    case BreakdownAxis::SpanLengthBins: return "span_length_bins";
    case BreakdownAxis::NonTerminalLabel: return "nonterminal_label";
  }
  return "?";
}

namespace {

std::string length_bin(int n) {
  if (n <= 5) return "<=5";
  if (n <= 10) return "6-10";
  if (n <= 20) return "11-20";
  return ">20";
}

std::string span_bin(int len) {
  if (len <= 1) return "1";
  if (len <= 3) return "2-3";
  if (len <= 6) return "4-6";
  return ">=7";
}

std::string intents_bin(int count) { return count >= 4 ? ">=4" : std::to_string(count); }

void utterance_axis_rows(const std::vector<TopTree>& predictions,
                         const std::vector<TopTree>& golds, BreakdownAxis axis,
                         BreakdownReport& report) {
  std::map<std::string, std::vector<size_t>> bins;
  for (size_t i = 0; i < golds.size(); ++i) {
    std::string bin = axis == BreakdownAxis::UtteranceLengthBins
                          ? length_bin(golds[i].utterance().size())
                          : intents_bin(tree_stats(golds[i]).intent_count);
    bins[bin].push_back(i);
  }
  for (const auto& [bin, idx] : bins) {
    std::vector<TopTree> p, g;
    for (size_t i : idx) {
      p.push_back(predictions[i]);
      g.push_back(golds[i]);
    }
    BreakdownRow row;
    row.axis = axis_name(axis);
    row.bin = bin;
    row.count = static_cast<int>(idx.size());
    row.em = exact_match(p, g);
    row.f1 = labeled_bracketing_f1(p, g).f1;
    report.rows.push_back(std::move(row));
  }
}

void constituent_axis_rows(const std::vector<TopTree>& predictions,
                           const std::vector<TopTree>& golds, BreakdownAxis axis,
                           BreakdownReport& report) {
  // For every gold constituent: correct iff the prediction reproduces the
  // same (label, span) bracket, counted with multiset semantics.
  std::map<std::string, std::pair<int, int>> bins;  // bin -> {correct, total}
  for (size_t i = 0; i < golds.size(); ++i) {
    std::vector<std::string> pred_brackets;
    collect_brackets(predictions[i].root(), pred_brackets);
    std::sort(pred_brackets.begin(), pred_brackets.end());
    auto gold_spans = tree_stats(golds[i]).spans;
    for (const auto& span : gold_spans) {
      std::string key = span.label.str() + "\t" + std::to_string(span.start) + "\t" +
                        std::to_string(span.end);
      std::string bin =
          axis == BreakdownAxis::SpanLengthBins ? span_bin(span.length) : span.label.str();
      auto& cell = bins[bin];
      auto it = std::lower_bound(pred_brackets.begin(), pred_brackets.end(), key);
      if (it != pred_brackets.end() && *it == key) {
        pred_brackets.erase(it);  // consume the match
        cell.first += 1;
      }
      cell.second += 1;
    }
  }
  for (const auto& [bin, cell] : bins) {
    BreakdownRow row;
    row.axis = axis_name(axis);
    row.bin = bin;
    row.count = cell.second;
    row.f1 = cell.second ? static_cast<double>(cell.first) / cell.second : 0.0;
    report.rows.push_back(std::move(row));
  }
}

}  // namespace

BreakdownReport breakdown_report(const std::vector<TopTree>& predictions,
                                 const std::vector<TopTree>& golds,
                                 const std::vector<BreakdownAxis>& axes) {
  require_aligned(predictions, golds);
  BreakdownReport report;
  for (auto axis : axes) {
    switch (axis) {
      case BreakdownAxis::UtteranceLengthBins:
      case BreakdownAxis::IntentsPerUtterance:
        utterance_axis_rows(predictions, golds, axis, report);
        break;
      case BreakdownAxis::SpanLengthBins:
      case BreakdownAxis::NonTerminalLabel:
        constituent_axis_rows(predictions, golds, axis, report);
        break;
    }
  }
  return report;
}

std::string BreakdownReport::tsv() const {
  std::ostringstream out;
  out << "axis\tbin\tcount\tem\tscore\n";
  for (const auto& row : rows) {
    out << row.axis << '\t' << row.bin << '\t' << row.count << '\t';
    if (row.em >= 0.0) {
      out << row.em;
    } else {
      out << "-";
    }
    out << '\t' << row.f1 << '\n';
  }
  return out.str();
}

}  // namespace topshift
