#pragma once

// Model configuration, vocabularies and the trainable parameter set for the
// encoder + stack/buffer-masked decoder. All tensors are double precision;
// biases are stored as 1-row matrices so every parameter is reachable
// through for_each_tensor (optimizer, checkpointing, averaging, gradient
// checks all iterate the same registry).

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "topshift/corpus.hpp"
#include "topshift/transitions.hpp"

namespace topshift::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct ModelConfig {
  int d_model = 64;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int heads = 4;  // cross-attention: head 0 = stack, head 1 = buffer, rest regular
  int ff_dim = 256;
  double dropout = 0.3;
  double label_smoothing = 0.01;
  bool sinusoidal_positions = true;

  int d_head() const { return d_model / heads; }
  void validate() const;  // throws Error on inconsistent dimensions
};

enum class HeadRole { Stack, Buffer, Regular };

// Cross-attention head role by index. Exactly one stack and one buffer head
// per decoder layer.
inline HeadRole head_role(int head_index) {
  if (head_index == 0) return HeadRole::Stack;
  if (head_index == 1) return HeadRole::Buffer;
  return HeadRole::Regular;
}

struct TokenVocab {
  std::vector<std::string> tokens;  // index = id; tokens[0] is <unk>
  std::unordered_map<std::string, int> ids;

  static TokenVocab build(const Dataset& train);
  int unk_id() const { return 0; }
  int id_of(const std::string& token) const;
  int size() const { return static_cast<int>(tokens.size()); }
};

// All scoreable actions, in action_order_less order. Built as the cross
// product of the system's action kinds with the labels observed in training
// (ReduceK additionally crossed with observed arities).
struct ActionVocab {
  std::vector<Action> actions;
  std::unordered_map<std::string, int> ids;

  static ActionVocab build(const Dataset& train, SystemKind system);
  int id_of(const Action& action) const;  // -1 if absent
  int size() const { return static_cast<int>(actions.size()); }
  int bos_id() const { return size(); }  // embedding row for the start symbol
};

struct LayerNormParams {
  Mat gamma, beta;  // 1 x d
};

struct AttnParams {
  Mat wq, wk, wv, wo;  // d x d
  Mat bq, bk, bv, bo;  // 1 x d
};

struct FFParams {
  Mat w1, b1, w2, b2;  // d x ff, 1 x ff, ff x d, 1 x d
};

struct EncoderLayerParams {
  LayerNormParams ln1;
  AttnParams attn;
  LayerNormParams ln2;
  FFParams ff;
};

struct DecoderLayerParams {
  LayerNormParams ln1;
  AttnParams self_attn;
  LayerNormParams ln2;
  AttnParams cross_attn;
  LayerNormParams ln3;
  FFParams ff;
};

struct ModelParams {
  ModelConfig config;
  SystemKind system = SystemKind::InOrder;
  TokenVocab token_vocab;
  ActionVocab action_vocab;
  LabelVocab label_vocab;

  Mat token_embedding;   // V_tok x d
  Mat action_embedding;  // (V_act + 1) x d; last row embeds the start symbol
  std::vector<EncoderLayerParams> encoder;
  std::vector<DecoderLayerParams> decoder;
  Mat output_weight;  // d x V_act
  Mat output_bias;    // 1 x V_act

  static ModelParams init(const ModelConfig& config, SystemKind system, TokenVocab tokens,
                          ActionVocab actions, LabelVocab labels, std::uint64_t seed);

  // Same shapes, all zeros: gradient and optimizer-moment containers.
  ModelParams zeros_like() const;

  template <typename F>
  void for_each_tensor(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    visit(*this, f);
  }

  void save(const std::string& path) const;
  static ModelParams load(const std::string& path);  // validates shapes

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    f("token_embedding", self.token_embedding);
    f("action_embedding", self.action_embedding);
    auto attn = [&](const std::string& prefix, auto& a) {
      f(prefix + ".wq", a.wq);
      f(prefix + ".wk", a.wk);
      f(prefix + ".wv", a.wv);
      f(prefix + ".wo", a.wo);
      f(prefix + ".bq", a.bq);
      f(prefix + ".bk", a.bk);
      f(prefix + ".bv", a.bv);
      f(prefix + ".bo", a.bo);
    };
    auto ln = [&](const std::string& prefix, auto& l) {
      f(prefix + ".gamma", l.gamma);
      f(prefix + ".beta", l.beta);
    };
    auto ff = [&](const std::string& prefix, auto& x) {
      f(prefix + ".w1", x.w1);
      f(prefix + ".b1", x.b1);
      f(prefix + ".w2", x.w2);
      f(prefix + ".b2", x.b2);
    };
    for (size_t i = 0; i < self.encoder.size(); ++i) {
      std::string p = "encoder" + std::to_string(i);
      ln(p + ".ln1", self.encoder[i].ln1);
      attn(p + ".attn", self.encoder[i].attn);
      ln(p + ".ln2", self.encoder[i].ln2);
      ff(p + ".ff", self.encoder[i].ff);
    }
    for (size_t i = 0; i < self.decoder.size(); ++i) {
      std::string p = "decoder" + std::to_string(i);
      ln(p + ".ln1", self.decoder[i].ln1);
      attn(p + ".self_attn", self.decoder[i].self_attn);
      ln(p + ".ln2", self.decoder[i].ln2);
      attn(p + ".cross_attn", self.decoder[i].cross_attn);
      ln(p + ".ln3", self.decoder[i].ln3);
      ff(p + ".ff", self.decoder[i].ff);
    }
    f("output_weight", self.output_weight);
    f("output_bias", self.output_bias);
  }
};

// Sinusoidal position encodings, rows 0..(positions-1).
Mat positional_encoding(int positions, int d_model);

}  // namespace topshift::nn
