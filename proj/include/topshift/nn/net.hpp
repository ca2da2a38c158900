#pragma once

// Forward/backward passes for the encoder + masked-cross-attention decoder,
// the training loss with exact hand-derived gradients, and an incremental
// (KV-cached) decoding path that computes the same per-step distributions.

#include <memory>
#include <optional>
#include <random>

#include "topshift/masks.hpp"
#include "topshift/nn/model.hpp"

namespace topshift::nn {

struct NoLegalActionsError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Spec-level attention: one head over encoder states with an additive mask.
// beta_i = (q Wq)(h_i Wk)^T / sqrt(d) + m_i,  alpha = softmax(beta),
// z = sum_i alpha_i (h_i Wv). Masked positions get alpha exactly 0. If every
// position is masked, z is the zero vector and *all_masked is set.
// ---------------------------------------------------------------------------
struct AttentionHead {
  Mat wq, wk, wv;  // d_model x d
};

Vec attend(const Vec& q, const Mat& h, const std::vector<bool>& mask, const AttentionHead& head,
           bool* all_masked = nullptr);

// Token ids for an utterance (unknown words map to <unk>).
std::vector<int> token_ids(const ModelParams& params, const Utterance& utterance);

// Input representation e_1..e_n: embedding rows plus sinusoidal positions
// when configured.
Mat embed_tokens(const ModelParams& params, const std::vector<int>& ids);

// Deterministic inference-mode encoder (dropout off).
Mat encode(const ModelParams& params, const Utterance& utterance);
// Same, over caller-supplied frozen per-position vectors (n x d_model).
Mat encode_embedded(const ModelParams& params, const Mat& embeddings);

// ---------------------------------------------------------------------------
// Teacher-forced training example, prepared once: gold action ids, the legal
// action-id set at every step, and the additive stack/buffer mask matrices
// (0 attendable / -inf masked), all derived by replaying the transition
// system and mask updates over the gold sequence.
// ---------------------------------------------------------------------------
struct PreparedExample {
  std::vector<int> tokens;                  // length n
  std::vector<int> gold;                    // length m, ids into the action vocab
  std::vector<std::vector<int>> legal_ids;  // per step, sorted vocab ids
  Mat stack_mask;                           // m x n additive
  Mat buffer_mask;                          // m x n additive
  std::optional<Mat> frozen_embeddings;     // external e_i override (n x d)
};

PreparedExample prepare_example(const ModelParams& params, const TopTree& tree);

struct LossResult {
  double loss = 0.0;  // averaged per token-action over the batch
  int action_count = 0;
};

// Exact gradients for every parameter tensor; grads must be zeros_like the
// params (gradients accumulate into it). `dropout_rng` enables dropout at
// the configured rate; pass nullptr for deterministic evaluation.
LossResult loss_and_grads(const ModelParams& params, const std::vector<PreparedExample>& batch,
                          ModelParams& grads, std::mt19937_64* dropout_rng = nullptr);

// Loss only (used by finite-difference checks).
LossResult loss_only(const ModelParams& params, const std::vector<PreparedExample>& batch);

// ---------------------------------------------------------------------------
// Incremental decoding. EncodedUtterance is shared by all hypotheses of one
// utterance; DecoderState is the per-hypothesis KV cache. decode_step runs
// one decoder step (without committing) and returns log-probabilities
// aligned with `legal`; actions outside the vocabulary score -inf. advance
// commits the staged step with the chosen action.
// ---------------------------------------------------------------------------
struct EncodedUtterance {
  Mat h;                            // n x d
  std::vector<Mat> cross_k, cross_v;  // per decoder layer: n x d
  int n = 0;
};

std::shared_ptr<const EncodedUtterance> encode_for_decoding(const ModelParams& params,
                                                            const Utterance& utterance);
std::shared_ptr<const EncodedUtterance> encode_for_decoding(const ModelParams& params,
                                                            const Mat& embeddings);

struct DecoderState {
  std::shared_ptr<const EncodedUtterance> enc;
  std::vector<Mat> self_k, self_v;  // per layer, t x d
  int t = 0;
  int prev_action_id = -1;  // -1 = start symbol

  struct Staged {
    std::vector<Eigen::RowVectorXd> k_rows, v_rows;  // per layer
    bool valid = false;
  } staged;
};

DecoderState begin_decode(std::shared_ptr<const EncodedUtterance> enc);

// Log-probs over `legal` (normalized over the scoreable subset; -inf for
// actions missing from the vocabulary). Throws NoLegalActionsError if legal
// is empty or nothing is scoreable.
std::vector<double> decode_step(const ModelParams& params, DecoderState& state,
                                const MaskPair& masks, const std::vector<Action>& legal);

void advance_decoder(const ModelParams& params, DecoderState& state, const Action& chosen);

}  // namespace topshift::nn
