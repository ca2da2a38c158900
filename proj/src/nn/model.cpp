#include "topshift/nn/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"

namespace topshift::nn {

void ModelConfig::validate() const {
  if (d_model < 1 || encoder_layers < 1 || decoder_layers < 1 || ff_dim < 1) {
    throw Error("model dimensions must be positive");
  }
  if (heads < 2) {
    throw Error("need at least 2 heads (one stack head and one buffer head)");
  }
  if (d_model % heads != 0) {
    throw Error("d_model must be divisible by the head count");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw Error("dropout must be in [0, 1)");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw Error("label_smoothing must be in [0, 1)");
  }
}

TokenVocab TokenVocab::build(const Dataset& train) {
  TokenVocab v;
  v.tokens.push_back("<unk>");
  std::set<std::string> uniq;
  for (const auto& ex : train.examples) {
    for (const auto& t : ex.tree.utterance().tokens()) uniq.insert(t);
  }
  for (const auto& t : uniq) v.tokens.push_back(t);
  for (size_t i = 0; i < v.tokens.size(); ++i) v.ids[v.tokens[i]] = static_cast<int>(i);
  return v;
}

int TokenVocab::id_of(const std::string& token) const {
  auto it = ids.find(token);
  return it == ids.end() ? unk_id() : it->second;
}

ActionVocab ActionVocab::build(const Dataset& train, SystemKind system) {
  LabelVocab labels = train.label_vocab;
  std::set<int> arities;
  if (system == SystemKind::BottomUp) {
    for (const auto& ex : train.examples) {
      // Arities observed in gold trees = child counts of constituents.
      std::vector<NodePtr> todo = {ex.tree.root()};
      while (!todo.empty()) {
        NodePtr node = todo.back();
        todo.pop_back();
        if (node->is_token()) continue;
        arities.insert(static_cast<int>(node->children().size()));
        for (const auto& c : node->children()) todo.push_back(c);
      }
    }
  }

  std::vector<Action> actions;
  actions.push_back(Action::shift());
  if (system != SystemKind::BottomUp) actions.push_back(Action::reduce());
  if (system != SystemKind::TopDown) actions.push_back(Action::finish());
  if (system != SystemKind::BottomUp) {
    for (const auto& l : labels.intents) actions.push_back(Action::non_terminal(l));
    for (const auto& l : labels.slots) actions.push_back(Action::non_terminal(l));
  } else {
    for (int k : arities) {
      for (const auto& l : labels.intents) actions.push_back(Action::reduce_k(k, l));
      for (const auto& l : labels.slots) actions.push_back(Action::reduce_k(k, l));
    }
  }
  std::sort(actions.begin(), actions.end(), action_order_less);

  ActionVocab v;
  v.actions = std::move(actions);
  for (size_t i = 0; i < v.actions.size(); ++i) v.ids[v.actions[i].str()] = static_cast<int>(i);
  return v;
}

int ActionVocab::id_of(const Action& action) const {
  auto it = ids.find(action.str());
  return it == ids.end() ? -1 : it->second;
}

namespace {

void xavier_init(Mat& m, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
  }
}

void normal_init(Mat& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
  }
}

AttnParams make_attn(int d) {
  AttnParams a;
  a.wq = Mat::Zero(d, d);
  a.wk = Mat::Zero(d, d);
  a.wv = Mat::Zero(d, d);
  a.wo = Mat::Zero(d, d);
  a.bq = Mat::Zero(1, d);
  a.bk = Mat::Zero(1, d);
  a.bv = Mat::Zero(1, d);
  a.bo = Mat::Zero(1, d);
  return a;
}

LayerNormParams make_ln(int d) {
  LayerNormParams l;
  l.gamma = Mat::Ones(1, d);
  l.beta = Mat::Zero(1, d);
  return l;
}

FFParams make_ff(int d, int ff) {
  FFParams f;
  f.w1 = Mat::Zero(d, ff);
  f.b1 = Mat::Zero(1, ff);
  f.w2 = Mat::Zero(ff, d);
  f.b2 = Mat::Zero(1, d);
  return f;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, SystemKind system, TokenVocab tokens,
                              ActionVocab actions, LabelVocab labels, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.system = system;
  p.token_vocab = std::move(tokens);
  p.action_vocab = std::move(actions);
  p.label_vocab = std::move(labels);

  const int d = config.d_model;
  p.token_embedding = Mat::Zero(p.token_vocab.size(), d);
  p.action_embedding = Mat::Zero(p.action_vocab.size() + 1, d);
  for (int i = 0; i < config.encoder_layers; ++i) {
    p.encoder.push_back({make_ln(d), make_attn(d), make_ln(d), make_ff(d, config.ff_dim)});
  }
  for (int i = 0; i < config.decoder_layers; ++i) {
    p.decoder.push_back({make_ln(d), make_attn(d), make_ln(d), make_attn(d), make_ln(d),
                         make_ff(d, config.ff_dim)});
  }
  p.output_weight = Mat::Zero(d, p.action_vocab.size());
  p.output_bias = Mat::Zero(1, p.action_vocab.size());

  std::mt19937_64 rng(seed);
  p.for_each_tensor([&](const std::string& name, Mat& m) {
    if (name.find(".gamma") != std::string::npos || name.find(".beta") != std::string::npos ||
        name.find(".b") != std::string::npos || name == "output_bias") {
      return;  // biases zero, layer norm at identity
    }
    if (name == "token_embedding" || name == "action_embedding") {
      normal_init(m, 1.0 / std::sqrt(static_cast<double>(d)), rng);
    } else {
      xavier_init(m, rng);
    }
  });
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.for_each_tensor([](const std::string&, Mat& m) { m.setZero(); });
  return z;
}

Mat positional_encoding(int positions, int d_model) {
  Mat pe = Mat::Zero(positions, d_model);
  for (int pos = 0; pos < positions; ++pos) {
    for (int i = 0; i < d_model; i += 2) {
      const double angle = pos / std::pow(10000.0, static_cast<double>(i) / d_model);
      pe(pos, i) = std::sin(angle);
      if (i + 1 < d_model) pe(pos, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

// ---------------------------------------------------------------------------
// Checkpoint container: "TSCK" magic, version, JSON header (config, vocabs,
// tensor manifest), then raw little-endian doubles per tensor.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void ModelParams::save(const std::string& path) const {
  nlohmann::json header;
  header["config"] = {{"d_model", config.d_model},
                      {"encoder_layers", config.encoder_layers},
                      {"decoder_layers", config.decoder_layers},
                      {"heads", config.heads},
                      {"ff_dim", config.ff_dim},
                      {"dropout", config.dropout},
                      {"label_smoothing", config.label_smoothing},
                      {"sinusoidal_positions", config.sinusoidal_positions}};
  header["system"] = system_name(system);
  header["token_vocab"] = token_vocab.tokens;
  std::vector<std::string> action_strs;
  for (const auto& a : action_vocab.actions) action_strs.push_back(a.str());
  header["action_vocab"] = action_strs;
  std::vector<std::string> intents, slots;
  for (const auto& l : label_vocab.intents) intents.push_back(l.name);
  for (const auto& l : label_vocab.slots) slots.push_back(l.name);
  header["label_vocab"] = {{"intents", intents}, {"slots", slots}};

  nlohmann::json manifest = nlohmann::json::array();
  for_each_tensor([&](const std::string& name, const Mat& m) {
    manifest.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  header["tensors"] = manifest;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const std::string header_str = header.dump();
  const std::uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for_each_tensor([&](const std::string&, const Mat& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double v = m(i, j);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
    }
  });
  if (!out) throw Error("short write while saving checkpoint '" + path + "'");
}

ModelParams ModelParams::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || std::string(magic, 4) != std::string(kMagic, 4)) {
    throw Error("'" + path + "' is not a checkpoint file");
  }
  if (version != kVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version));
  }
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  nlohmann::json header = nlohmann::json::parse(header_str);

  ModelConfig config;
  const auto& jc = header.at("config");
  config.d_model = jc.at("d_model");
  config.encoder_layers = jc.at("encoder_layers");
  config.decoder_layers = jc.at("decoder_layers");
  config.heads = jc.at("heads");
  config.ff_dim = jc.at("ff_dim");
  config.dropout = jc.at("dropout");
  config.label_smoothing = jc.at("label_smoothing");
  config.sinusoidal_positions = jc.at("sinusoidal_positions");

  auto system = system_from_name(header.at("system"));
  if (!system) throw Error("checkpoint names an unknown transition system");

  TokenVocab tokens;
  tokens.tokens = header.at("token_vocab").get<std::vector<std::string>>();
  for (size_t i = 0; i < tokens.tokens.size(); ++i) {
    tokens.ids[tokens.tokens[i]] = static_cast<int>(i);
  }
  ActionVocab actions;
  for (const auto& s : header.at("action_vocab")) {
    actions.actions.push_back(Action::parse(s.get<std::string>()));
  }
  for (size_t i = 0; i < actions.actions.size(); ++i) {
    actions.ids[actions.actions[i].str()] = static_cast<int>(i);
  }
  LabelVocab labels;
  for (const auto& s : header.at("label_vocab").at("intents")) {
    labels.add(Label::intent(s.get<std::string>()));
  }
  for (const auto& s : header.at("label_vocab").at("slots")) {
    labels.add(Label::slot(s.get<std::string>()));
  }

  ModelParams p = ModelParams::init(config, *system, std::move(tokens), std::move(actions),
                                    std::move(labels), 0);

  // Validate the manifest against the shapes implied by the hyperparameters,
  // then read tensor data.
  const auto& manifest = header.at("tensors");
  size_t idx = 0;
  p.for_each_tensor([&](const std::string& name, Mat& m) {
    if (idx >= manifest.size()) throw Error("checkpoint manifest too short");
    const auto& entry = manifest[idx++];
    if (entry.at("name") != name || entry.at("rows") != m.rows() ||
        entry.at("cols") != m.cols()) {
      throw Error("checkpoint tensor '" + std::string(entry.at("name")) +
                  "' does not match the expected shape of '" + name + "'");
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        m(i, j) = v;
      }
    }
  });
  if (idx != manifest.size()) throw Error("checkpoint manifest too long");
  if (!in) throw Error("checkpoint '" + path + "' is truncated");
  return p;
}

}  // namespace topshift::nn
