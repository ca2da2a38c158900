#include "topshift/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "topshift/nn/scorer.hpp"

namespace topshift::nn {

TrainConfig TrainConfig::desk() {
  TrainConfig tc;
  tc.warmup_steps = 300;
  tc.batch_tokens = 512;
  return tc;
}

void TrainConfig::apply(const std::map<std::string, std::string>& kv, ModelConfig& mc,
                        TrainConfig& tc) {
  auto geti = [&](const char* key, int& out) {
    auto it = kv.find(key);
    if (it != kv.end()) out = std::stoi(it->second);
  };
  auto getd = [&](const char* key, double& out) {
    auto it = kv.find(key);
    if (it != kv.end()) out = std::stod(it->second);
  };
  geti("d_model", mc.d_model);
  geti("encoder_layers", mc.encoder_layers);
  geti("decoder_layers", mc.decoder_layers);
  geti("heads", mc.heads);
  geti("ff_dim", mc.ff_dim);
  getd("dropout", mc.dropout);
  getd("label_smoothing", mc.label_smoothing);
  if (auto it = kv.find("sinusoidal_positions"); it != kv.end()) {
    mc.sinusoidal_positions = it->second == "1" || it->second == "true";
  }
  geti("epochs", tc.epochs);
  getd("lr_peak", tc.lr_peak);
  getd("lr_init", tc.lr_init);
  getd("lr_floor", tc.lr_floor);
  geti("warmup_steps", tc.warmup_steps);
  geti("batch_tokens", tc.batch_tokens);
  getd("adam_beta1", tc.adam_beta1);
  getd("adam_beta2", tc.adam_beta2);
  getd("adam_eps", tc.adam_eps);
  geti("average_checkpoints", tc.average_checkpoints);
  getd("early_stop_em", tc.early_stop_em);
  if (auto it = kv.find("seed"); it != kv.end()) tc.seed = std::stoull(it->second);
}

double scheduled_lr(const TrainConfig& c, int step) {
  if (step <= c.warmup_steps) {
    return c.lr_init +
           (c.lr_peak - c.lr_init) * static_cast<double>(step) / c.warmup_steps;
  }
  const double lr =
      c.lr_peak * std::sqrt(static_cast<double>(c.warmup_steps) / static_cast<double>(step));
  return std::max(lr, c.lr_floor);
}

double validation_exact_match(const ModelParams& params, const Dataset& dataset) {
  if (dataset.examples.empty()) return 0.0;
  size_t hits = 0;
  for (const auto& ex : dataset.examples) {
    try {
      auto result = greedy_parse(ex.tree.utterance(), params);
      if (serialize_tree(result.tree) == serialize_tree(ex.tree)) ++hits;
    } catch (const Error&) {
      // decode failure counts as a miss
    }
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

namespace {

struct AdamState {
  ModelParams m, v;
  int step = 0;
};

void adam_update(ModelParams& params, const ModelParams& grads, AdamState& adam,
                 const TrainConfig& tc, double lr) {
  adam.step += 1;
  const double bc1 = 1.0 - std::pow(tc.adam_beta1, adam.step);
  const double bc2 = 1.0 - std::pow(tc.adam_beta2, adam.step);
  std::vector<Mat*> ps, ms, vs;
  std::vector<const Mat*> gs;
  params.for_each_tensor([&](const std::string&, Mat& t) { ps.push_back(&t); });
  adam.m.for_each_tensor([&](const std::string&, Mat& t) { ms.push_back(&t); });
  adam.v.for_each_tensor([&](const std::string&, Mat& t) { vs.push_back(&t); });
  grads.for_each_tensor([&](const std::string&, const Mat& t) { gs.push_back(&t); });
  for (size_t i = 0; i < ps.size(); ++i) {
    Mat& m = *ms[i];
    Mat& v = *vs[i];
    const Mat& g = *gs[i];
    m = tc.adam_beta1 * m + (1.0 - tc.adam_beta1) * g;
    v = tc.adam_beta2 * v + (1.0 - tc.adam_beta2) * g.cwiseProduct(g);
    const Mat mhat = m / bc1;
    const Mat vhat = v / bc2;
    ps[i]->array() -= lr * mhat.array() / (vhat.array().sqrt() + tc.adam_eps);
  }
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& valid_set, SystemKind system,
                  const ModelConfig& model_config, const TrainConfig& train_config,
                  std::ostream* log_stream) {
  if (train_set.examples.empty()) throw EmptyCorpusError("training corpus is empty");

  auto token_vocab = TokenVocab::build(train_set);
  auto action_vocab = ActionVocab::build(train_set, system);
  ModelParams params = ModelParams::init(model_config, system, std::move(token_vocab),
                                         std::move(action_vocab), train_set.label_vocab,
                                         train_config.seed);

  // Validation labels unseen in training can never be predicted; flag them.
  for (const auto& ex : valid_set.examples) {
    LabelVocab v;
    std::vector<NodePtr> todo = {ex.tree.root()};
    while (!todo.empty()) {
      NodePtr node = todo.back();
      todo.pop_back();
      if (node->is_token()) continue;
      if (!params.label_vocab.contains(node->label()) && log_stream) {
        *log_stream << "warning: validation label " << node->label().str()
                    << " unseen in training\n";
      }
      for (const auto& c : node->children()) todo.push_back(c);
    }
  }

  std::vector<PreparedExample> prepared;
  prepared.reserve(train_set.size());
  for (const auto& ex : train_set.examples) prepared.push_back(prepare_example(params, ex.tree));

  AdamState adam{params.zeros_like(), params.zeros_like(), 0};
  std::mt19937_64 shuffle_rng(train_config.seed ^ 0x5deece66dull);
  std::mt19937_64 dropout_rng(train_config.seed ^ 0xda3e39cb94b95bdbull);

  // Best checkpoints by validation EM (ties keep the earliest epoch).
  struct Snapshot {
    double em;
    int epoch;
    ModelParams params;
  };
  std::vector<Snapshot> best;

  TrainResult result{params, {}, 0.0};
  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    std::vector<size_t> order(prepared.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_weighted = 0.0;
    int action_total = 0;
    double lr = 0.0;
    size_t cursor = 0;
    while (cursor < order.size()) {
      std::vector<PreparedExample> batch;
      int tokens = 0;
      while (cursor < order.size() &&
             (batch.empty() || tokens + static_cast<int>(prepared[order[cursor]].tokens.size()) <=
                                   train_config.batch_tokens)) {
        tokens += static_cast<int>(prepared[order[cursor]].tokens.size());
        batch.push_back(prepared[order[cursor]]);
        ++cursor;
      }
      ModelParams grads = params.zeros_like();
      const auto loss = loss_and_grads(params, batch, grads, &dropout_rng);
      lr = scheduled_lr(train_config, adam.step + 1);
      adam_update(params, grads, adam, train_config, lr);
      loss_weighted += loss.loss * loss.action_count;
      action_total += loss.action_count;
    }

    const double val_em = validation_exact_match(params, valid_set);
    EpochLog log{epoch, action_total ? loss_weighted / action_total : 0.0, val_em, lr};
    result.log.push_back(log);
    if (log_stream) {
      *log_stream << "epoch " << epoch << " loss " << log.train_loss << " val_em " << val_em
                  << " lr " << lr << "\n";
    }

    const size_t keep = static_cast<size_t>(std::max(1, train_config.average_checkpoints));
    best.push_back({val_em, epoch, params});
    std::stable_sort(best.begin(), best.end(), [](const Snapshot& a, const Snapshot& b) {
      if (a.em != b.em) return a.em > b.em;
      return a.epoch < b.epoch;
    });
    if (best.size() > keep) best.resize(keep);

    result.best_val_em = std::max(result.best_val_em, val_em);
    if (train_config.early_stop_em > 0.0 && val_em >= train_config.early_stop_em) break;
  }

  // Average the kept checkpoints.
  if (!best.empty()) {
    ModelParams averaged = best[0].params;
    std::vector<Mat*> acc;
    averaged.for_each_tensor([&](const std::string&, Mat& t) { acc.push_back(&t); });
    for (size_t s = 1; s < best.size(); ++s) {
      size_t i = 0;
      best[s].params.for_each_tensor(
          [&](const std::string&, const Mat& t) { *acc[i++] += t; });
    }
    const double inv = 1.0 / static_cast<double>(best.size());
    for (Mat* t : acc) *t *= inv;
    result.params = std::move(averaged);
  } else {
    result.params = std::move(params);
  }
  return result;
}

}  // namespace topshift::nn
