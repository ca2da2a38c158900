#include "topshift/nn/scorer.hpp"

namespace topshift::nn {

namespace {

class NeuralState : public ScorerState {
 public:
  explicit NeuralState(DecoderState dec) : dec_(std::move(dec)) {}
  DecoderState& dec() { return dec_; }
  std::unique_ptr<ScorerState> clone() const override {
    return std::make_unique<NeuralState>(*this);
  }

 private:
  DecoderState dec_;
};

}  // namespace

std::unique_ptr<ScorerState> NeuralScorer::begin(const Utterance& utterance) const {
  auto enc = frozen_ ? encode_for_decoding(*params_, *frozen_)
                     : encode_for_decoding(*params_, utterance);
  return std::make_unique<NeuralState>(begin_decode(std::move(enc)));
}

std::vector<double> NeuralScorer::score(ScorerState& state, const Configuration&,
                                        const MaskPair& masks,
                                        const std::vector<Action>& legal) const {
  return decode_step(*params_, dynamic_cast<NeuralState&>(state).dec(), masks, legal);
}

void NeuralScorer::advance(ScorerState& state, const Action& chosen) const {
  advance_decoder(*params_, dynamic_cast<NeuralState&>(state).dec(), chosen);
}

ParseHypothesis greedy_parse(const Utterance& utterance, const ModelParams& params) {
  NeuralScorer scorer(params);
  return topshift::greedy_parse(utterance, scorer, params.system, params.label_vocab);
}

std::vector<ParseHypothesis> beam_parse(const Utterance& utterance, const ModelParams& params,
                                        int beam_size) {
  NeuralScorer scorer(params);
  return topshift::beam_parse(utterance, scorer, params.system, params.label_vocab, beam_size);
}

}  // namespace topshift::nn
