#pragma once

// Scoring interface driving greedy/beam decoding, plus the stub scorers used
// in tests and fuzzing. A scorer owns per-utterance state that hypotheses
// clone during beam expansion; score() never mutates the parse-relevant
// state until advance() commits an action.

#include <memory>
#include <vector>

#include "topshift/masks.hpp"
#include "topshift/transitions.hpp"
#include "topshift/tree.hpp"

namespace topshift {

class ScorerState {
 public:
  virtual ~ScorerState() = default;
  virtual std::unique_ptr<ScorerState> clone() const = 0;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::unique_ptr<ScorerState> begin(const Utterance& utterance) const = 0;
  // Log-probabilities aligned with `legal`, normalized over the scoreable
  // subset; -inf marks actions this scorer can never emit.
  virtual std::vector<double> score(ScorerState& state, const Configuration& config,
                                    const MaskPair& masks,
                                    const std::vector<Action>& legal) const = 0;
  // Commits one of the actions just scored.
  virtual void advance(ScorerState& state, const Action& chosen) const = 0;
};

// Equal probability over all legal actions (zero logits everywhere).
class UniformScorer : public Scorer {
 public:
  std::unique_ptr<ScorerState> begin(const Utterance& utterance) const override;
  std::vector<double> score(ScorerState& state, const Configuration& config,
                            const MaskPair& masks,
                            const std::vector<Action>& legal) const override;
  void advance(ScorerState& state, const Action& chosen) const override;
};

// Deterministic pseudo-random logits keyed by (seed, step, action) — history
// independent given the step index, so exhaustive-search oracles can re-score
// prefixes consistently.
class RandomScorer : public Scorer {
 public:
  explicit RandomScorer(std::uint64_t seed) : seed_(seed) {}
  std::unique_ptr<ScorerState> begin(const Utterance& utterance) const override;
  std::vector<double> score(ScorerState& state, const Configuration& config,
                            const MaskPair& masks,
                            const std::vector<Action>& legal) const override;
  void advance(ScorerState& state, const Action& chosen) const override;

 private:
  std::uint64_t seed_;
};

// Assigns probability 1 to the gold oracle action at every step.
class OracleStubScorer : public Scorer {
 public:
  OracleStubScorer(const TopTree& tree, SystemKind system);
  std::unique_ptr<ScorerState> begin(const Utterance& utterance) const override;
  std::vector<double> score(ScorerState& state, const Configuration& config,
                            const MaskPair& masks,
                            const std::vector<Action>& legal) const override;
  void advance(ScorerState& state, const Action& chosen) const override;

 private:
  std::vector<Action> gold_;
};

}  // namespace topshift
