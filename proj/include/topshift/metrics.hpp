#pragma once

// TOP evaluation: exact match, labeled bracketing F1 and tree-labeled F1,
// plus per-axis breakdown reports.
//
// Bracketing items are (label, start, end) for every constituent including
// pre-terminal slots; tree-labeled items are (start, canonical subtree
// serialization) — the span offset is part of the match key, so a subtree
// match always implies a labeled-bracket match and TF1 <= F1. Both scores
// are micro-averaged multiset precision/recall over the corpus.

#include <string>
#include <vector>

#include "topshift/tree.hpp"

namespace topshift {

struct LengthMismatchError : Error {
  using Error::Error;
};
struct UnknownAxisError : Error {
  using Error::Error;
};

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Fraction of pairs whose canonical serializations are identical.
double exact_match(const std::vector<TopTree>& predictions, const std::vector<TopTree>& golds);

PrecisionRecallF1 labeled_bracketing_f1(const std::vector<TopTree>& predictions,
                                        const std::vector<TopTree>& golds);

PrecisionRecallF1 tree_labeled_f1(const std::vector<TopTree>& predictions,
                                  const std::vector<TopTree>& golds);

enum class BreakdownAxis {
  UtteranceLengthBins,
  IntentsPerUtterance,
  SpanLengthBins,
  NonTerminalLabel,
};

BreakdownAxis axis_from_name(const std::string& name);  // throws UnknownAxisError
const char* axis_name(BreakdownAxis axis);

struct BreakdownRow {
  std::string axis;
  std::string bin;
  int count = 0;     // examples (utterance axes) or gold constituents (span/label axes)
  double em = -1.0;  // utterance axes only
  double f1 = -1.0;  // utterance axes only; constituent axes report accuracy here
};

struct BreakdownReport {
  std::vector<BreakdownRow> rows;
  std::string tsv() const;
};

// EM and F1 per bin for the utterance-level axes; per-bin constituent
// accuracy (gold constituent reproduced with identical label and span) for
// the span-length and label axes.
BreakdownReport breakdown_report(const std::vector<TopTree>& predictions,
                                 const std::vector<TopTree>& golds,
                                 const std::vector<BreakdownAxis>& axes);

}  // namespace topshift
