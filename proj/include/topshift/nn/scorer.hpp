#pragma once

// Neural scorer: drives the search interface with the trained model's
// incremental decoder.

#include <optional>

#include "topshift/nn/net.hpp"
#include "topshift/scorer.hpp"
#include "topshift/search.hpp"

namespace topshift::nn {

class NeuralScorer : public Scorer {
 public:
  explicit NeuralScorer(const ModelParams& params) : params_(&params) {}
  // Frozen per-position embeddings override the token table lookup for the
  // one utterance this scorer is used on.
  NeuralScorer(const ModelParams& params, Mat frozen_embeddings)
      : params_(&params), frozen_(std::move(frozen_embeddings)) {}

  std::unique_ptr<ScorerState> begin(const Utterance& utterance) const override;
  std::vector<double> score(ScorerState& state, const Configuration& config,
                            const MaskPair& masks,
                            const std::vector<Action>& legal) const override;
  void advance(ScorerState& state, const Action& chosen) const override;

 private:
  const ModelParams* params_;
  std::optional<Mat> frozen_;
};

ParseHypothesis greedy_parse(const Utterance& utterance, const ModelParams& params);
std::vector<ParseHypothesis> beam_parse(const Utterance& utterance, const ModelParams& params,
                                        int beam_size);

}  // namespace topshift::nn
