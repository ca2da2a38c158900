#include "topshift/nn/net.hpp"

#include <cmath>
#include <limits>

#include "topshift/oracle.hpp"

namespace topshift::nn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLayerNormEps = 1e-5;

Eigen::RowVectorXd pe_row(int pos, int d_model) {
  Eigen::RowVectorXd row(d_model);
  for (int i = 0; i < d_model; i += 2) {
    const double angle = pos / std::pow(10000.0, static_cast<double>(i) / d_model);
    row(i) = std::sin(angle);
    if (i + 1 < d_model) row(i + 1) = std::cos(angle);
  }
  return row;
}

// ---- layer norm -----------------------------------------------------------

struct LayerNormCache {
  Mat xhat;
  Vec inv_std;
};

Mat layer_norm_fwd(const Mat& x, const LayerNormParams& p, LayerNormCache* cache) {
  const Eigen::Index rows = x.rows(), d = x.cols();
  Mat xhat(rows, d);
  Vec inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mu) * is;
    inv_std(r) = is;
  }
  Mat y = (xhat.array().rowwise() * p.gamma.row(0).array()).rowwise() + p.beta.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Mat layer_norm_bwd(const Mat& dy, const LayerNormParams& p, const LayerNormCache& cache,
                   LayerNormParams& pg) {
  pg.gamma.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  pg.beta.row(0) += dy.colwise().sum();
  Mat dxhat = dy.array().rowwise() * p.gamma.row(0).array();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_dxhat = dxhat.row(r).mean();
    const double mean_dxhat_xhat = (dxhat.row(r).array() * cache.xhat.row(r).array()).mean();
    dx.row(r) = cache.inv_std(r) * (dxhat.row(r).array() - mean_dxhat -
                                    cache.xhat.row(r).array() * mean_dxhat_xhat);
  }
  return dx;
}

// ---- masked softmax over rows ---------------------------------------------
// Fully-masked rows produce an all-zero probability row (null attention
// readout), which keeps the graph well-defined and differentiable.

Mat masked_softmax_rows(const Mat& scores) {
  Mat p = Mat::Zero(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double m = scores.row(r).maxCoeff();
    if (m == kNegInf) continue;
    Eigen::ArrayXd e = (scores.row(r).array() - m).exp();
    p.row(r) = e / e.sum();
  }
  return p;
}

Mat softmax_rows_bwd(const Mat& p, const Mat& dp) {
  Mat ds(p.rows(), p.cols());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double dot = p.row(r).dot(dp.row(r));
    ds.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
  }
  return ds;
}

// ---- dropout ---------------------------------------------------------------

struct Dropout {
  Mat mask;
  bool active = false;

  Mat apply(const Mat& x, double rate, std::mt19937_64* rng) {
    if (!rng || rate <= 0.0) {
      active = false;
      return x;
    }
    active = true;
    mask.resize(x.rows(), x.cols());
    std::bernoulli_distribution keep(1.0 - rate);
    const double scale = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) mask(i, j) = keep(*rng) ? scale : 0.0;
    }
    return x.cwiseProduct(mask);
  }
  Mat bwd(const Mat& dy) const { return active ? dy.cwiseProduct(mask).eval() : dy; }
};

// ---- multi-head attention ---------------------------------------------------

struct AttnCache {
  Mat qin, kin;
  Mat q, k, v;
  std::vector<Mat> probs;  // per head
  Mat concat;
};

// Additive masks per head (nullptr = unmasked); each mask is q_rows x kv_rows.
using HeadMasks = std::vector<const Mat*>;

Mat attention_fwd(const Mat& qin, const Mat& kin, const AttnParams& p, int heads,
                  const HeadMasks& masks, AttnCache* cache) {
  const Eigen::Index d = qin.cols();
  const Eigen::Index dh = d / heads;
  Mat q = (qin * p.wq).rowwise() + p.bq.row(0);
  Mat k = (kin * p.wk).rowwise() + p.bk.row(0);
  Mat v = (kin * p.wv).rowwise() + p.bv.row(0);
  Mat concat(qin.rows(), d);
  std::vector<Mat> probs(static_cast<size_t>(heads));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    auto qh = q.middleCols(h * dh, dh);
    auto kh = k.middleCols(h * dh, dh);
    auto vh = v.middleCols(h * dh, dh);
    Mat scores = (qh * kh.transpose()) * scale;
    if (!masks.empty() && masks[static_cast<size_t>(h)]) {
      scores += *masks[static_cast<size_t>(h)];
    }
    probs[static_cast<size_t>(h)] = masked_softmax_rows(scores);
    concat.middleCols(h * dh, dh) = probs[static_cast<size_t>(h)] * vh;
  }
  Mat out = (concat * p.wo).rowwise() + p.bo.row(0);
  if (cache) {
    cache->qin = qin;
    cache->kin = kin;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->concat = std::move(concat);
  }
  return out;
}

// Returns d/dqin; accumulates d/dkin into *dkin (must be presized to kin's
// shape) and parameter gradients into pg.
Mat attention_bwd(const Mat& dout, const AttnParams& p, int heads, const AttnCache& cache,
                  AttnParams& pg, Mat* dkin) {
  const Eigen::Index d = cache.qin.cols();
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  pg.wo += cache.concat.transpose() * dout;
  pg.bo.row(0) += dout.colwise().sum();
  Mat dconcat = dout * p.wo.transpose();

  Mat dq = Mat::Zero(cache.q.rows(), d);
  Mat dk = Mat::Zero(cache.k.rows(), d);
  Mat dv = Mat::Zero(cache.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Mat& ph = cache.probs[static_cast<size_t>(h)];
    auto kh = cache.k.middleCols(h * dh, dh);
    auto qh = cache.q.middleCols(h * dh, dh);
    auto vh = cache.v.middleCols(h * dh, dh);
    Mat dzh = dconcat.middleCols(h * dh, dh);
    Mat dp = dzh * vh.transpose();
    dv.middleCols(h * dh, dh) += ph.transpose() * dzh;
    Mat ds = softmax_rows_bwd(ph, dp);
    dq.middleCols(h * dh, dh) += ds * kh * scale;
    dk.middleCols(h * dh, dh) += ds.transpose() * qh * scale;
  }

  pg.wq += cache.qin.transpose() * dq;
  pg.bq.row(0) += dq.colwise().sum();
  pg.wk += cache.kin.transpose() * dk;
  pg.bk.row(0) += dk.colwise().sum();
  pg.wv += cache.kin.transpose() * dv;
  pg.bv.row(0) += dv.colwise().sum();

  *dkin += dk * p.wk.transpose() + dv * p.wv.transpose();
  return dq * p.wq.transpose();
}

// ---- feed-forward -----------------------------------------------------------

struct FFCache {
  Mat xin, pre;
};

Mat ff_fwd(const Mat& x, const FFParams& p, FFCache* cache) {
  Mat pre = (x * p.w1).rowwise() + p.b1.row(0);
  Mat act = pre.cwiseMax(0.0);
  Mat out = (act * p.w2).rowwise() + p.b2.row(0);
  if (cache) {
    cache->xin = x;
    cache->pre = std::move(pre);
  }
  return out;
}

Mat ff_bwd(const Mat& dy, const FFParams& p, const FFCache& cache, FFParams& pg) {
  Mat act = cache.pre.cwiseMax(0.0);
  pg.w2 += act.transpose() * dy;
  pg.b2.row(0) += dy.colwise().sum();
  Mat dact = dy * p.w2.transpose();
  Mat dpre = (cache.pre.array() > 0.0).cast<double>() * dact.array();
  pg.w1 += cache.xin.transpose() * dpre;
  pg.b1.row(0) += dpre.colwise().sum();
  return dpre * p.w1.transpose();
}

// ---- encoder / decoder layers -----------------------------------------------

struct EncLayerCache {
  LayerNormCache ln1, ln2;
  AttnCache attn;
  FFCache ff;
  Dropout drop1, drop2;
};

Mat enc_layer_fwd(const Mat& x, const EncoderLayerParams& p, const ModelConfig& cfg,
                  EncLayerCache* cache, std::mt19937_64* rng) {
  EncLayerCache local;
  EncLayerCache& c = cache ? *cache : local;
  Mat xn = layer_norm_fwd(x, p.ln1, &c.ln1);
  Mat a = attention_fwd(xn, xn, p.attn, cfg.heads, {}, &c.attn);
  Mat x1 = x + c.drop1.apply(a, cfg.dropout, rng);
  Mat xn2 = layer_norm_fwd(x1, p.ln2, &c.ln2);
  Mat f = ff_fwd(xn2, p.ff, &c.ff);
  return x1 + c.drop2.apply(f, cfg.dropout, rng);
}

Mat enc_layer_bwd(const Mat& dy, const EncoderLayerParams& p, const ModelConfig& cfg,
                  const EncLayerCache& c, EncoderLayerParams& pg) {
  Mat dxn2 = ff_bwd(c.drop2.bwd(dy), p.ff, c.ff, pg.ff);
  Mat dx1 = dy + layer_norm_bwd(dxn2, p.ln2, c.ln2, pg.ln2);
  Mat da = c.drop1.bwd(dx1);
  Mat dkin = Mat::Zero(c.attn.kin.rows(), c.attn.kin.cols());
  Mat dqin = attention_bwd(da, p.attn, cfg.heads, c.attn, pg.attn, &dkin);
  return dx1 + layer_norm_bwd(dqin + dkin, p.ln1, c.ln1, pg.ln1);
}

struct DecLayerCache {
  LayerNormCache ln1, ln2, ln3;
  AttnCache self_attn, cross;
  FFCache ff;
  Dropout drop1, drop2, drop3;
};

Mat dec_layer_fwd(const Mat& y, const Mat& h, const DecoderLayerParams& p,
                  const ModelConfig& cfg, const Mat& causal, const Mat& stack_mask,
                  const Mat& buffer_mask, DecLayerCache* cache, std::mt19937_64* rng) {
  DecLayerCache local;
  DecLayerCache& c = cache ? *cache : local;
  HeadMasks self_masks(static_cast<size_t>(cfg.heads), &causal);
  Mat yn = layer_norm_fwd(y, p.ln1, &c.ln1);
  Mat a = attention_fwd(yn, yn, p.self_attn, cfg.heads, self_masks, &c.self_attn);
  Mat y1 = y + c.drop1.apply(a, cfg.dropout, rng);

  HeadMasks cross_masks(static_cast<size_t>(cfg.heads), nullptr);
  for (int hd = 0; hd < cfg.heads; ++hd) {
    if (head_role(hd) == HeadRole::Stack) cross_masks[static_cast<size_t>(hd)] = &stack_mask;
    if (head_role(hd) == HeadRole::Buffer) cross_masks[static_cast<size_t>(hd)] = &buffer_mask;
  }
  Mat yn2 = layer_norm_fwd(y1, p.ln2, &c.ln2);
  Mat cr = attention_fwd(yn2, h, p.cross_attn, cfg.heads, cross_masks, &c.cross);
  Mat y2 = y1 + c.drop2.apply(cr, cfg.dropout, rng);

  Mat yn3 = layer_norm_fwd(y2, p.ln3, &c.ln3);
  Mat f = ff_fwd(yn3, p.ff, &c.ff);
  return y2 + c.drop3.apply(f, cfg.dropout, rng);
}

Mat dec_layer_bwd(const Mat& dy, const DecoderLayerParams& p, const ModelConfig& cfg,
                  const DecLayerCache& c, DecoderLayerParams& pg, Mat& dh) {
  Mat dyn3 = ff_bwd(c.drop3.bwd(dy), p.ff, c.ff, pg.ff);
  Mat dy2 = dy + layer_norm_bwd(dyn3, p.ln3, c.ln3, pg.ln3);

  Mat dcr = c.drop2.bwd(dy2);
  Mat dh_local = Mat::Zero(c.cross.kin.rows(), c.cross.kin.cols());
  Mat dyn2 = attention_bwd(dcr, p.cross_attn, cfg.heads, c.cross, pg.cross_attn, &dh_local);
  dh += dh_local;
  Mat dy1 = dy2 + layer_norm_bwd(dyn2, p.ln2, c.ln2, pg.ln2);

  Mat da = c.drop1.bwd(dy1);
  Mat dkin = Mat::Zero(c.self_attn.kin.rows(), c.self_attn.kin.cols());
  Mat dqin = attention_bwd(da, p.self_attn, cfg.heads, c.self_attn, pg.self_attn, &dkin);
  return dy1 + layer_norm_bwd(dqin + dkin, p.ln1, c.ln1, pg.ln1);
}

Mat causal_mask(int m) {
  Mat mask = Mat::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) mask(i, j) = kNegInf;
  }
  return mask;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public embedding / encoding entry points
// ---------------------------------------------------------------------------

Vec attend(const Vec& q, const Mat& h, const std::vector<bool>& mask, const AttentionHead& head,
           bool* all_masked) {
  const Eigen::Index d = head.wq.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Eigen::RowVectorXd qp = q.transpose() * head.wq;
  Mat kp = h * head.wk;
  Mat vp = h * head.wv;
  Eigen::RowVectorXd beta = qp * kp.transpose() * scale;
  for (Eigen::Index i = 0; i < beta.size(); ++i) {
    if (!mask[static_cast<size_t>(i)]) beta(i) = kNegInf;
  }
  const double m = beta.maxCoeff();
  if (m == kNegInf) {
    if (all_masked) *all_masked = true;
    return Vec::Zero(d);
  }
  if (all_masked) *all_masked = false;
  Eigen::ArrayXd e = (beta.transpose().array() - m).exp();
  Eigen::ArrayXd alpha = e / e.sum();
  return vp.transpose() * alpha.matrix();
}

std::vector<int> token_ids(const ModelParams& params, const Utterance& utterance) {
  std::vector<int> ids;
  ids.reserve(static_cast<size_t>(utterance.size()));
  for (const auto& t : utterance.tokens()) ids.push_back(params.token_vocab.id_of(t));
  return ids;
}

Mat embed_tokens(const ModelParams& params, const std::vector<int>& ids) {
  const int d = params.config.d_model;
  Mat e(static_cast<Eigen::Index>(ids.size()), d);
  for (size_t i = 0; i < ids.size(); ++i) e.row(static_cast<Eigen::Index>(i)) =
      params.token_embedding.row(ids[i]);
  if (params.config.sinusoidal_positions) {
    e += positional_encoding(static_cast<int>(ids.size()), d);
  }
  return e;
}

namespace {

Mat run_encoder(const ModelParams& params, const Mat& embedded,
                std::vector<EncLayerCache>* caches, std::mt19937_64* rng) {
  Mat x = embedded;
  for (size_t l = 0; l < params.encoder.size(); ++l) {
    x = enc_layer_fwd(x, params.encoder[l], params.config,
                      caches ? &(*caches)[l] : nullptr, rng);
  }
  return x;
}

}  // namespace

Mat encode(const ModelParams& params, const Utterance& utterance) {
  return run_encoder(params, embed_tokens(params, token_ids(params, utterance)), nullptr,
                     nullptr);
}

Mat encode_embedded(const ModelParams& params, const Mat& embeddings) {
  Mat e = embeddings;
  if (params.config.sinusoidal_positions) {
    e += positional_encoding(static_cast<int>(e.rows()), params.config.d_model);
  }
  return run_encoder(params, e, nullptr, nullptr);
}

// ---------------------------------------------------------------------------
// Teacher-forced loss and gradients
// ---------------------------------------------------------------------------

PreparedExample prepare_example(const ModelParams& params, const TopTree& tree) {
  PreparedExample ex;
  ex.tokens = token_ids(params, tree.utterance());
  const auto gold_actions = oracle_actions(tree, params.system);
  const int m = static_cast<int>(gold_actions.size());
  const int n = tree.utterance().size();
  ex.stack_mask = Mat::Zero(m, n);
  ex.buffer_mask = Mat::Zero(m, n);

  Configuration config = init_config(tree.utterance(), params.system);
  MaskPair masks = initial_masks(n);
  for (int t = 0; t < m; ++t) {
    const auto legal = legal_actions(config, params.label_vocab);
    std::vector<int> ids;
    for (const auto& a : legal) {
      const int id = params.action_vocab.id_of(a);
      if (id >= 0) ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    ex.legal_ids.push_back(std::move(ids));

    const int gold_id = params.action_vocab.id_of(gold_actions[static_cast<size_t>(t)]);
    if (gold_id < 0) {
      throw Error("gold action " + gold_actions[static_cast<size_t>(t)].str() +
                  " is missing from the action vocabulary");
    }
    ex.gold.push_back(gold_id);

    for (int i = 0; i < n; ++i) {
      ex.stack_mask(t, i) = masks.stack_mask[static_cast<size_t>(i)] ? 0.0 : kNegInf;
      ex.buffer_mask(t, i) = masks.buffer_mask[static_cast<size_t>(i)] ? 0.0 : kNegInf;
    }
    masks = update_masks(masks, gold_actions[static_cast<size_t>(t)], config);
    config = apply_action(config, gold_actions[static_cast<size_t>(t)]);
  }
  return ex;
}

namespace {

struct ExampleTrace {
  Mat enc_embedded;
  Dropout enc_emb_drop;
  std::vector<EncLayerCache> enc_layers;
  Mat h;
  Mat dec_embedded;
  Dropout dec_emb_drop;
  std::vector<DecLayerCache> dec_layers;
  Mat y;
  Mat causal;
  Mat probs;  // m x V; exactly 0 on illegal actions
};

Mat run_encoder_cached(const ModelParams& params, const Mat& x0, ExampleTrace& trace,
                       std::mt19937_64* rng) {
  Mat x = x0;
  for (size_t l = 0; l < params.encoder.size(); ++l) {
    x = enc_layer_fwd(x, params.encoder[l], params.config, &trace.enc_layers[l], rng);
  }
  return x;
}

double example_fwd(const ModelParams& params, const PreparedExample& ex, ExampleTrace& trace,
                   std::mt19937_64* rng) {
  const ModelConfig& cfg = params.config;
  const int m = static_cast<int>(ex.gold.size());

  Mat enc_in;
  if (ex.frozen_embeddings) {
    enc_in = *ex.frozen_embeddings;
    if (cfg.sinusoidal_positions) {
      enc_in += positional_encoding(static_cast<int>(enc_in.rows()), cfg.d_model);
    }
  } else {
    enc_in = embed_tokens(params, ex.tokens);
  }
  trace.enc_embedded = enc_in;
  Mat x = trace.enc_emb_drop.apply(enc_in, cfg.dropout, rng);
  trace.enc_layers.resize(params.encoder.size());
  x = run_encoder_cached(params, x, trace, rng);
  trace.h = x;

  Mat dec_in(m, cfg.d_model);
  for (int t = 0; t < m; ++t) {
    const int prev = t == 0 ? params.action_vocab.bos_id() : ex.gold[static_cast<size_t>(t - 1)];
    dec_in.row(t) = params.action_embedding.row(prev);
  }
  if (cfg.sinusoidal_positions) dec_in += positional_encoding(m, cfg.d_model);
  trace.dec_embedded = dec_in;
  Mat y = trace.dec_emb_drop.apply(dec_in, cfg.dropout, rng);
  trace.causal = causal_mask(m);
  trace.dec_layers.resize(params.decoder.size());
  for (size_t l = 0; l < params.decoder.size(); ++l) {
    y = dec_layer_fwd(y, trace.h, params.decoder[l], cfg, trace.causal, ex.stack_mask,
                      ex.buffer_mask, &trace.dec_layers[l], rng);
  }
  trace.y = y;

  Mat logits = (y * params.output_weight).rowwise() + params.output_bias.row(0);
  const int v = params.action_vocab.size();
  Mat masked = Mat::Constant(m, v, kNegInf);
  for (int t = 0; t < m; ++t) {
    for (int id : ex.legal_ids[static_cast<size_t>(t)]) masked(t, id) = logits(t, id);
  }
  trace.probs = masked_softmax_rows(masked);

  const double eps = cfg.label_smoothing;
  double loss = 0.0;
  for (int t = 0; t < m; ++t) {
    const auto& legal = ex.legal_ids[static_cast<size_t>(t)];
    const double smooth = eps / static_cast<double>(legal.size());
    double l = -(1.0 - eps) * std::log(trace.probs(t, ex.gold[static_cast<size_t>(t)]));
    for (int id : legal) l -= smooth * std::log(trace.probs(t, id));
    loss += l;
  }
  return loss;
}

void example_bwd(const ModelParams& params, const PreparedExample& ex, const ExampleTrace& trace,
                 double inv_actions, ModelParams& grads) {
  const ModelConfig& cfg = params.config;
  const int m = static_cast<int>(ex.gold.size());
  const double eps = cfg.label_smoothing;

  // d(loss)/d(logits) = probs - target on legal entries; zero elsewhere.
  Mat dlogits = trace.probs;
  for (int t = 0; t < m; ++t) {
    const auto& legal = ex.legal_ids[static_cast<size_t>(t)];
    const double smooth = eps / static_cast<double>(legal.size());
    for (int id : legal) dlogits(t, id) -= smooth;
    dlogits(t, ex.gold[static_cast<size_t>(t)]) -= 1.0 - eps;
  }
  dlogits *= inv_actions;

  grads.output_weight += trace.y.transpose() * dlogits;
  grads.output_bias.row(0) += dlogits.colwise().sum();
  Mat dy = dlogits * params.output_weight.transpose();

  Mat dh = Mat::Zero(trace.h.rows(), trace.h.cols());
  for (size_t l = params.decoder.size(); l-- > 0;) {
    dy = dec_layer_bwd(dy, params.decoder[l], cfg, trace.dec_layers[l], grads.decoder[l], dh);
  }
  Mat ddec_in = trace.dec_emb_drop.bwd(dy);
  for (int t = 0; t < m; ++t) {
    const int prev = t == 0 ? params.action_vocab.bos_id() : ex.gold[static_cast<size_t>(t - 1)];
    grads.action_embedding.row(prev) += ddec_in.row(t);
  }

  Mat dx = dh;
  for (size_t l = params.encoder.size(); l-- > 0;) {
    dx = enc_layer_bwd(dx, params.encoder[l], cfg, trace.enc_layers[l], grads.encoder[l]);
  }
  Mat denc_in = trace.enc_emb_drop.bwd(dx);
  if (!ex.frozen_embeddings) {
    for (size_t i = 0; i < ex.tokens.size(); ++i) {
      grads.token_embedding.row(ex.tokens[i]) += denc_in.row(static_cast<Eigen::Index>(i));
    }
  }
}

}  // namespace

LossResult loss_and_grads(const ModelParams& params, const std::vector<PreparedExample>& batch,
                          ModelParams& grads, std::mt19937_64* dropout_rng) {
  LossResult result;
  for (const auto& ex : batch) result.action_count += static_cast<int>(ex.gold.size());
  if (result.action_count == 0) return result;
  const double inv = 1.0 / static_cast<double>(result.action_count);
  double loss_sum = 0.0;
  for (const auto& ex : batch) {
    ExampleTrace trace;
    loss_sum += example_fwd(params, ex, trace, dropout_rng);
    example_bwd(params, ex, trace, inv, grads);
  }
  result.loss = loss_sum * inv;
  return result;
}

LossResult loss_only(const ModelParams& params, const std::vector<PreparedExample>& batch) {
  LossResult result;
  for (const auto& ex : batch) result.action_count += static_cast<int>(ex.gold.size());
  if (result.action_count == 0) return result;
  double loss_sum = 0.0;
  for (const auto& ex : batch) {
    ExampleTrace trace;
    loss_sum += example_fwd(params, ex, trace, nullptr);
  }
  result.loss = loss_sum / static_cast<double>(result.action_count);
  return result;
}

// ---------------------------------------------------------------------------
// Incremental decoding
// ---------------------------------------------------------------------------

std::shared_ptr<const EncodedUtterance> encode_for_decoding(const ModelParams& params,
                                                            const Utterance& utterance) {
  auto enc = std::make_shared<EncodedUtterance>();
  enc->h = encode(params, utterance);
  enc->n = utterance.size();
  for (const auto& layer : params.decoder) {
    enc->cross_k.push_back((enc->h * layer.cross_attn.wk).rowwise() +
                           layer.cross_attn.bk.row(0));
    enc->cross_v.push_back((enc->h * layer.cross_attn.wv).rowwise() +
                           layer.cross_attn.bv.row(0));
  }
  return enc;
}

std::shared_ptr<const EncodedUtterance> encode_for_decoding(const ModelParams& params,
                                                            const Mat& embeddings) {
  auto enc = std::make_shared<EncodedUtterance>();
  enc->h = encode_embedded(params, embeddings);
  enc->n = static_cast<int>(embeddings.rows());
  for (const auto& layer : params.decoder) {
    enc->cross_k.push_back((enc->h * layer.cross_attn.wk).rowwise() +
                           layer.cross_attn.bk.row(0));
    enc->cross_v.push_back((enc->h * layer.cross_attn.wv).rowwise() +
                           layer.cross_attn.bv.row(0));
  }
  return enc;
}

DecoderState begin_decode(std::shared_ptr<const EncodedUtterance> enc) {
  DecoderState state;
  state.enc = std::move(enc);
  return state;
}

namespace {

Eigen::RowVectorXd ln_row(const Eigen::RowVectorXd& x, const LayerNormParams& p) {
  const double mu = x.mean();
  const double var = (x.array() - mu).square().mean();
  const double is = 1.0 / std::sqrt(var + kLayerNormEps);
  return (((x.array() - mu) * is) * p.gamma.row(0).array()).matrix() + p.beta.row(0);
}

Eigen::RowVectorXd ff_row(const Eigen::RowVectorXd& x, const FFParams& p) {
  Eigen::RowVectorXd pre = x * p.w1 + p.b1.row(0);
  return pre.cwiseMax(0.0) * p.w2 + p.b2.row(0);
}

// Single-row attention over a key/value matrix with an optional additive
// mask row. Matches attention_fwd row-for-row.
Eigen::RowVectorXd attend_row(const Eigen::RowVectorXd& q, const Mat& k, const Mat& v, int heads,
                              const Eigen::RowVectorXd* mask, const AttnParams& p) {
  const Eigen::Index d = q.size();
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Eigen::RowVectorXd concat(d);
  for (int h = 0; h < heads; ++h) {
    Eigen::RowVectorXd scores =
        q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * scale;
    if (mask) scores += *mask;
    const double m = scores.maxCoeff();
    if (m == kNegInf) {
      concat.middleCols(h * dh, dh).setZero();
      continue;
    }
    Eigen::ArrayXd e = (scores.transpose().array() - m).exp();
    Eigen::ArrayXd alpha = e / e.sum();
    concat.middleCols(h * dh, dh) = alpha.matrix().transpose() * v.middleCols(h * dh, dh);
  }
  return concat * p.wo + p.bo.row(0);
}

// Like attend_row but with per-head mask rows (cross attention roles).
Eigen::RowVectorXd attend_row_per_head(const Eigen::RowVectorXd& q, const Mat& k, const Mat& v,
                                       int heads,
                                       const std::vector<const Eigen::RowVectorXd*>& masks,
                                       const AttnParams& p) {
  const Eigen::Index d = q.size();
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Eigen::RowVectorXd concat(d);
  for (int h = 0; h < heads; ++h) {
    Eigen::RowVectorXd scores =
        q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * scale;
    if (masks[static_cast<size_t>(h)]) scores += *masks[static_cast<size_t>(h)];
    const double m = scores.maxCoeff();
    if (m == kNegInf) {
      concat.middleCols(h * dh, dh).setZero();
      continue;
    }
    Eigen::ArrayXd e = (scores.transpose().array() - m).exp();
    Eigen::ArrayXd alpha = e / e.sum();
    concat.middleCols(h * dh, dh) = alpha.matrix().transpose() * v.middleCols(h * dh, dh);
  }
  return concat * p.wo + p.bo.row(0);
}

}  // namespace

std::vector<double> decode_step(const ModelParams& params, DecoderState& state,
                                const MaskPair& masks, const std::vector<Action>& legal) {
  if (legal.empty()) throw NoLegalActionsError("decode_step with no legal actions");
  const ModelConfig& cfg = params.config;
  const int d = cfg.d_model;
  const int n = state.enc->n;

  Eigen::RowVectorXd stack_add(n), buffer_add(n);
  for (int i = 0; i < n; ++i) {
    stack_add(i) = masks.stack_mask[static_cast<size_t>(i)] ? 0.0 : kNegInf;
    buffer_add(i) = masks.buffer_mask[static_cast<size_t>(i)] ? 0.0 : kNegInf;
  }

  const int prev = state.prev_action_id < 0 ? params.action_vocab.bos_id()
                                            : state.prev_action_id;
  Eigen::RowVectorXd y = params.action_embedding.row(prev);
  if (cfg.sinusoidal_positions) y += pe_row(state.t, d);

  state.staged.k_rows.assign(params.decoder.size(), {});
  state.staged.v_rows.assign(params.decoder.size(), {});
  for (size_t l = 0; l < params.decoder.size(); ++l) {
    const auto& p = params.decoder[l];
    Eigen::RowVectorXd yn = ln_row(y, p.ln1);
    Eigen::RowVectorXd q = yn * p.self_attn.wq + p.self_attn.bq.row(0);
    Eigen::RowVectorXd k = yn * p.self_attn.wk + p.self_attn.bk.row(0);
    Eigen::RowVectorXd vv = yn * p.self_attn.wv + p.self_attn.bv.row(0);
    state.staged.k_rows[l] = k;
    state.staged.v_rows[l] = vv;
    Mat keys(state.t + 1, d), values(state.t + 1, d);
    if (state.t > 0) {
      keys.topRows(state.t) = state.self_k[l];
      values.topRows(state.t) = state.self_v[l];
    }
    keys.row(state.t) = k;
    values.row(state.t) = vv;
    y += attend_row(q, keys, values, cfg.heads, nullptr, p.self_attn);

    Eigen::RowVectorXd yn2 = ln_row(y, p.ln2);
    Eigen::RowVectorXd qc = yn2 * p.cross_attn.wq + p.cross_attn.bq.row(0);
    std::vector<const Eigen::RowVectorXd*> head_masks(static_cast<size_t>(cfg.heads), nullptr);
    for (int hd = 0; hd < cfg.heads; ++hd) {
      if (head_role(hd) == HeadRole::Stack) head_masks[static_cast<size_t>(hd)] = &stack_add;
      if (head_role(hd) == HeadRole::Buffer) head_masks[static_cast<size_t>(hd)] = &buffer_add;
    }
    y += attend_row_per_head(qc, state.enc->cross_k[l], state.enc->cross_v[l], cfg.heads,
                             head_masks, p.cross_attn);

    Eigen::RowVectorXd yn3 = ln_row(y, p.ln3);
    y += ff_row(yn3, p.ff);
  }
  state.staged.valid = true;

  Eigen::RowVectorXd logits = y * params.output_weight + params.output_bias.row(0);

  // Log-softmax over the scoreable legal subset.
  std::vector<double> out(legal.size(), kNegInf);
  double max_logit = kNegInf;
  std::vector<int> ids(legal.size(), -1);
  for (size_t i = 0; i < legal.size(); ++i) {
    ids[i] = params.action_vocab.id_of(legal[i]);
    if (ids[i] >= 0) max_logit = std::max(max_logit, logits(ids[i]));
  }
  if (max_logit == kNegInf) {
    throw NoLegalActionsError("no legal action is present in the action vocabulary");
  }
  double lse = 0.0;
  for (size_t i = 0; i < legal.size(); ++i) {
    if (ids[i] >= 0) lse += std::exp(logits(ids[i]) - max_logit);
  }
  lse = max_logit + std::log(lse);
  for (size_t i = 0; i < legal.size(); ++i) {
    if (ids[i] >= 0) out[i] = logits(ids[i]) - lse;
  }
  return out;
}

void advance_decoder(const ModelParams& params, DecoderState& state, const Action& chosen) {
  if (!state.staged.valid) {
    throw Error("advance_decoder requires a preceding decode_step");
  }
  const int id = params.action_vocab.id_of(chosen);
  if (id < 0) throw Error("action " + chosen.str() + " is not in the vocabulary");
  const int d = params.config.d_model;
  if (state.self_k.empty()) {
    state.self_k.assign(params.decoder.size(), Mat(0, d));
    state.self_v.assign(params.decoder.size(), Mat(0, d));
  }
  for (size_t l = 0; l < params.decoder.size(); ++l) {
    state.self_k[l].conservativeResize(state.t + 1, d);
    state.self_k[l].row(state.t) = state.staged.k_rows[l];
    state.self_v[l].conservativeResize(state.t + 1, d);
    state.self_v[l].row(state.t) = state.staged.v_rows[l];
  }
  state.t += 1;
  state.prev_action_id = id;
  state.staged.valid = false;
}

}  // namespace topshift::nn
