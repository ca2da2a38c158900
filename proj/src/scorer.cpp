#include "topshift/scorer.hpp"

#include <cmath>
#include <limits>

#include "topshift/oracle.hpp"

namespace topshift {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

class StepState : public ScorerState {
 public:
  int step = 0;
  std::unique_ptr<ScorerState> clone() const override {
    return std::make_unique<StepState>(*this);
  }
};

std::vector<double> normalize_logits(const std::vector<double>& logits) {
  double max_logit = kNegInf;
  for (double l : logits) max_logit = std::max(max_logit, l);
  double lse = 0.0;
  for (double l : logits) {
    if (l != kNegInf) lse += std::exp(l - max_logit);
  }
  lse = max_logit + std::log(lse);
  std::vector<double> out(logits.size(), kNegInf);
  for (size_t i = 0; i < logits.size(); ++i) {
    if (logits[i] != kNegInf) out[i] = logits[i] - lse;
  }
  return out;
}

}  // namespace

std::unique_ptr<ScorerState> UniformScorer::begin(const Utterance&) const {
  return std::make_unique<StepState>();
}

std::vector<double> UniformScorer::score(ScorerState&, const Configuration&, const MaskPair&,
                                         const std::vector<Action>& legal) const {
  return std::vector<double>(legal.size(), -std::log(static_cast<double>(legal.size())));
}

void UniformScorer::advance(ScorerState&, const Action&) const {}

std::unique_ptr<ScorerState> RandomScorer::begin(const Utterance&) const {
  return std::make_unique<StepState>();
}

std::vector<double> RandomScorer::score(ScorerState& state, const Configuration&,
                                        const MaskPair&,
                                        const std::vector<Action>& legal) const {
  const auto& s = dynamic_cast<StepState&>(state);
  std::vector<double> logits(legal.size());
  for (size_t i = 0; i < legal.size(); ++i) {
    std::uint64_t h = seed_ ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(s.step + 1));
    for (char c : legal[i].str()) {
      h ^= static_cast<std::uint64_t>(c);
      h *= 0x100000001b3ull;
    }
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    // Logits in [-2, 2).
    logits[i] = -2.0 + 4.0 * (static_cast<double>(h >> 11) /
                              static_cast<double>(1ull << 53));
  }
  return normalize_logits(logits);
}

void RandomScorer::advance(ScorerState& state, const Action&) const {
  dynamic_cast<StepState&>(state).step += 1;
}

OracleStubScorer::OracleStubScorer(const TopTree& tree, SystemKind system)
    : gold_(oracle_actions(tree, system)) {}

std::unique_ptr<ScorerState> OracleStubScorer::begin(const Utterance&) const {
  return std::make_unique<StepState>();
}

std::vector<double> OracleStubScorer::score(ScorerState& state, const Configuration&,
                                            const MaskPair&,
                                            const std::vector<Action>& legal) const {
  const auto& s = dynamic_cast<StepState&>(state);
  std::vector<double> out(legal.size(), kNegInf);
  if (static_cast<size_t>(s.step) >= gold_.size()) return out;
  for (size_t i = 0; i < legal.size(); ++i) {
    if (legal[i] == gold_[static_cast<size_t>(s.step)]) out[i] = 0.0;
  }
  return out;
}

void OracleStubScorer::advance(ScorerState& state, const Action&) const {
  dynamic_cast<StepState&>(state).step += 1;
}

}  // namespace topshift
