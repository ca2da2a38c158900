#include "topshift/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace topshift {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Hypothesis {
  Configuration config;
  MaskPair masks;
  std::unique_ptr<ScorerState> state;
  double score = 0.0;
  std::vector<Action> trace;
};

ParseHypothesis to_result(const Hypothesis& hyp, const Utterance& utterance) {
  return {TopTree(hyp.config.stack[0].node, utterance), hyp.trace, hyp.score};
}

}  // namespace

ParseHypothesis greedy_parse(const Utterance& utterance, const Scorer& scorer,
                             SystemKind system, const LabelVocab& label_vocab) {
  auto shared_utt = std::make_shared<const Utterance>(utterance);
  Configuration config = init_config(shared_utt, system);
  MaskPair masks = initial_masks(utterance.size());
  auto state = scorer.begin(utterance);
  std::vector<Action> trace;
  double total = 0.0;

  const int budget = step_budget(utterance.size());
  for (int step = 0; step < budget && !is_final(config); ++step) {
    const auto legal = legal_actions(config, label_vocab);
    const auto scores = scorer.score(*state, config, masks, legal);
    int best = -1;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] == kNegInf) continue;
      if (best < 0 || scores[i] > scores[static_cast<size_t>(best)]) {
        best = static_cast<int>(i);
      }
    }
    if (best < 0) {
      throw StepLimitError("scorer produced no scoreable legal action");
    }
    const Action& chosen = legal[static_cast<size_t>(best)];
    scorer.advance(*state, chosen);
    masks = update_masks(masks, chosen, config);
    config = apply_action(config, chosen);
    total += scores[static_cast<size_t>(best)];
    trace.push_back(chosen);
  }
  if (!is_final(config)) {
    throw StepLimitError("greedy decoding exceeded the step budget of " +
                         std::to_string(budget));
  }
  Hypothesis hyp{std::move(config), std::move(masks), nullptr, total, std::move(trace)};
  return to_result(hyp, utterance);
}

std::vector<ParseHypothesis> beam_parse(const Utterance& utterance, const Scorer& scorer,
                                        SystemKind system, const LabelVocab& label_vocab,
                                        int beam_size) {
  if (beam_size < 1) throw Error("beam_size must be >= 1");
  auto shared_utt = std::make_shared<const Utterance>(utterance);

  std::vector<Hypothesis> beams;
  {
    Hypothesis init;
    init.config = init_config(shared_utt, system);
    init.masks = initial_masks(utterance.size());
    init.state = scorer.begin(utterance);
    beams.push_back(std::move(init));
  }
  std::vector<Hypothesis> finished;

  const int budget = step_budget(utterance.size());
  for (int step = 0; step < budget && !beams.empty(); ++step) {
    std::vector<Hypothesis> live;
    for (auto& hyp : beams) {
      if (is_final(hyp.config)) {
        finished.push_back(std::move(hyp));
      } else {
        live.push_back(std::move(hyp));
      }
    }
    beams.clear();
    if (live.empty()) break;

    if (!finished.empty()) {
      double best_finished = kNegInf, best_live = kNegInf;
      for (const auto& h : finished) best_finished = std::max(best_finished, h.score);
      for (const auto& h : live) best_live = std::max(best_live, h.score);
      // Scores only decrease with further steps, so the live score is an
      // upper bound on any completion it can reach.
      if (best_live <= best_finished) break;
    }

    struct Candidate {
      size_t hyp;
      size_t act;
      double score;
    };
    std::vector<Candidate> candidates;
    std::vector<std::vector<Action>> legals(live.size());
    std::vector<std::vector<double>> scores(live.size());
    for (size_t i = 0; i < live.size(); ++i) {
      legals[i] = legal_actions(live[i].config, label_vocab);
      scores[i] = scorer.score(*live[i].state, live[i].config, live[i].masks, legals[i]);
      for (size_t j = 0; j < scores[i].size(); ++j) {
        if (scores[i][j] != kNegInf) {
          candidates.push_back({i, j, live[i].score + scores[i][j]});
        }
      }
    }
    if (candidates.empty()) break;
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.hyp != b.hyp) return a.hyp < b.hyp;
      return a.act < b.act;
    });
    const size_t keep = std::min<size_t>(static_cast<size_t>(beam_size), candidates.size());
    for (size_t c = 0; c < keep; ++c) {
      const auto& cand = candidates[c];
      const auto& parent = live[cand.hyp];
      const Action& chosen = legals[cand.hyp][cand.act];
      Hypothesis child;
      child.state = parent.state->clone();
      scorer.advance(*child.state, chosen);
      child.masks = update_masks(parent.masks, chosen, parent.config);
      child.config = apply_action(parent.config, chosen);
      child.score = cand.score;
      child.trace = parent.trace;
      child.trace.push_back(chosen);
      beams.push_back(std::move(child));
    }
  }
  for (auto& hyp : beams) {
    if (is_final(hyp.config)) finished.push_back(std::move(hyp));
  }
  if (finished.empty()) {
    throw StepLimitError("beam decoding found no finished hypothesis within the budget of " +
                         std::to_string(budget));
  }
  std::stable_sort(finished.begin(), finished.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
  std::vector<ParseHypothesis> out;
  for (size_t i = 0; i < finished.size() && i < static_cast<size_t>(beam_size); ++i) {
    out.push_back(to_result(finished[i], utterance));
  }
  return out;
}

}  // namespace topshift
