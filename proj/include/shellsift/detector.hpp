#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "shellsift/ast_view.hpp"
#include "shellsift/nn.hpp"
#include "shellsift/source_view.hpp"
#include "shellsift/stats_view.hpp"
#include "shellsift/util.hpp"

namespace shellsift {

// Production dimensions. Tests shrink them through ArchConfig; the defaults
// give the 300 + 96 + 32 = 428 fusion width.
struct ArchConfig {
  size_t src_embed_dim = 128;
  size_t src_filters = 100;  // per width, widths 3/4/5
  size_t ast_embed_dim = 64;
  size_t ast_filters = 32;  // per width, widths 2/3/4
  size_t stat_out_dim = 32;
  size_t hidden_dim = 256;

  size_t src_out() const { return 3 * src_filters; }
  size_t ast_out() const { return 3 * ast_filters; }
  size_t fused() const { return src_out() + ast_out() + stat_out_dim; }
};

inline constexpr size_t kFusedDim = 428;

struct FeatureConfig {
  size_t tau = 200;         // long-string compression threshold, codepoints
  size_t max_tokens = 512;  // head-tail truncation budget
  size_t ast_max_len = 128;
  size_t array_cap = 10;
  bool bytes_entropy = false;
};

struct ViewMask {
  bool src = true, ast = true, stat = true;
};

struct ThreeViewFeatures {
  std::vector<int> token_ids;
  std::vector<int> ast_ids;
  std::array<double, kStatDim> stats{};
};

struct LabeledFeatures {
  std::string id;
  int label = 0;  // 1 = malicious
  ThreeViewFeatures f;
};
using Dataset = std::vector<LabeledFeatures>;

// Full extraction pipeline for one file: lex/compress/tokenize + vocab lookup,
// parse + pruned linearization, and the 14-d statistics.
ThreeViewFeatures extract_features(std::string_view raw, const TokenVocab& vocab,
                                   const FeatureConfig& cfg);

struct Metrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

Metrics compute_metrics(const std::vector<double>& q, const std::vector<int>& labels,
                        double delta = 0.5);

struct TrainHyper {
  size_t epochs = 10;
  size_t batch = 8;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double delta = 0.5;  // decision threshold used for validation metrics
};

struct EpochLog {
  double train_loss = 0;
  Metrics val;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  size_t best_epoch = 0;
  uint64_t seed = 0;
};

template <typename T>
struct DetectorModelT {
  FeatureConfig fcfg;
  ArchConfig arch;
  ViewMask views;
  TokenVocab vocab;
  TrainHyper hyper;
  uint64_t seed = 0;

  nn::Embedding<T> src_emb;
  std::array<nn::ConvPool<T>, 3> src_conv;  // widths 3, 4, 5
  nn::Embedding<T> ast_emb;
  std::array<nn::ConvPool<T>, 3> ast_conv;  // widths 2, 3, 4
  nn::BatchNorm<T> stat_bn;
  nn::Linear<T> stat_proj;
  nn::Linear<T> fuse_hidden;
  nn::Dropout<T> drop;
  nn::Linear<T> fuse_out;

  void build(TokenVocab v, const FeatureConfig& cfg, ViewMask mask, uint64_t seed_,
             const ArchConfig& arch_ = {}) {
    vocab = std::move(v);
    fcfg = cfg;
    arch = arch_;
    views = mask;
    seed = seed_;
    Rng rng(derive_seed(seed_, "init"));
    src_emb.build(vocab.size(), arch.src_embed_dim, rng);
    src_conv[0].build(3, arch.src_filters, arch.src_embed_dim, rng);
    src_conv[1].build(4, arch.src_filters, arch.src_embed_dim, rng);
    src_conv[2].build(5, arch.src_filters, arch.src_embed_dim, rng);
    ast_emb.build(kAstVocabSize, arch.ast_embed_dim, rng);
    ast_conv[0].build(2, arch.ast_filters, arch.ast_embed_dim, rng);
    ast_conv[1].build(3, arch.ast_filters, arch.ast_embed_dim, rng);
    ast_conv[2].build(4, arch.ast_filters, arch.ast_embed_dim, rng);
    stat_bn.build(kStatDim);
    stat_proj.build(kStatDim, arch.stat_out_dim, rng);
    fuse_hidden.build(arch.fused(), arch.hidden_dim, rng);
    drop.rate = T(0.3);
    fuse_out.build(arch.hidden_dim, 2, rng);
  }

  // Fixed order; the checkpoint tensor list and optimizer state follow it.
  std::vector<nn::ParamRef<T>> params() {
    std::vector<nn::ParamRef<T>> blocks;
    src_emb.collect(blocks, "src.emb");
    src_conv[0].collect(blocks, "src.conv3");
    src_conv[1].collect(blocks, "src.conv4");
    src_conv[2].collect(blocks, "src.conv5");
    ast_emb.collect(blocks, "ast.emb");
    ast_conv[0].collect(blocks, "ast.conv2");
    ast_conv[1].collect(blocks, "ast.conv3");
    ast_conv[2].collect(blocks, "ast.conv4");
    stat_bn.collect(blocks, "stat.bn");
    stat_proj.collect(blocks, "stat.proj");
    fuse_hidden.collect(blocks, "fuse.hidden");
    fuse_out.collect(blocks, "fuse.out");
    return blocks;
  }

  void zero_grad() {
    for (auto& blk : params())
      for (auto& g : *blk.grad) g = T(0);
  }

  // Parameter values plus batch-norm running statistics; enough to restore
  // the best validation epoch.
  std::vector<std::vector<T>> save_state() {
    std::vector<std::vector<T>> s;
    for (auto& blk : params()) s.push_back(*blk.value);
    s.push_back(stat_bn.run_mean);
    s.push_back(stat_bn.run_var);
    return s;
  }

  void load_state(const std::vector<std::vector<T>>& s) {
    auto blocks = params();
    if (s.size() != blocks.size() + 2) throw HardError("model state shape mismatch");
    for (size_t i = 0; i < blocks.size(); ++i) *blocks[i].value = s[i];
    stat_bn.run_mean = s[blocks.size()];
    stat_bn.run_var = s[blocks.size() + 1];
  }
};

using DetectorModel = DetectorModelT<float>;

namespace detail {

template <typename T>
struct SeqCache {
  std::vector<int> padded;
  std::vector<T> embedded;
  std::array<typename nn::ConvPool<T>::Cache, 3> cc;
};

template <typename T>
void encode_ids(const nn::Embedding<T>& emb, const std::array<nn::ConvPool<T>, 3>& convs,
                const std::vector<int>& ids, size_t min_len, T* h_out, SeqCache<T>* cache) {
  SeqCache<T> local;
  SeqCache<T>& c = cache ? *cache : local;
  c.padded = ids;
  while (c.padded.size() < min_len) c.padded.push_back(0);
  emb.forward(c.padded, c.embedded);
  size_t off = 0;
  for (size_t i = 0; i < 3; ++i) {
    std::vector<T> out;
    convs[i].forward(c.embedded, c.padded.size(), out, cache ? &c.cc[i] : nullptr);
    for (size_t f = 0; f < out.size(); ++f) h_out[off + f] = out[f];
    off += out.size();
  }
}

template <typename T>
void backward_ids(nn::Embedding<T>& emb, std::array<nn::ConvPool<T>, 3>& convs,
                  const SeqCache<T>& cache, const T* dh) {
  std::vector<T> dembedded(cache.embedded.size(), T(0));
  size_t off = 0;
  for (size_t i = 0; i < 3; ++i) {
    std::vector<T> dout(convs[i].filters);
    for (size_t f = 0; f < dout.size(); ++f) dout[f] = dh[off + f];
    off += dout.size();
    convs[i].backward(cache.embedded, cache.padded.size(), cache.cc[i], dout, dembedded);
  }
  emb.backward(cache.padded, dembedded);
}

}  // namespace detail

// Training-mode forward and backward over one batch. Gradients accumulate
// into the model's grad buffers (call zero_grad first); the dropout mask is a
// pure function of dropout_seed so the finite-difference oracle can replay it.
template <typename T>
T loss_and_grad(DetectorModelT<T>& model, const Dataset& set, const std::vector<size_t>& idx,
                uint64_t dropout_seed, std::vector<T>* out_p = nullptr) {
  size_t batch = idx.size();
  if (batch == 0) throw HardError("empty batch");
  const size_t fused_dim = model.arch.fused();
  const size_t src_out = model.arch.src_out();
  const size_t stat_off = src_out + model.arch.ast_out();
  const size_t stat_out = model.arch.stat_out_dim;
  std::vector<detail::SeqCache<T>> src_c(batch), ast_c(batch);
  std::vector<T> fused(batch * fused_dim, T(0));
  std::vector<T> stats_in(batch * kStatDim);
  std::vector<int> labels(batch);
  for (size_t i = 0; i < batch; ++i) {
    const LabeledFeatures& s = set[idx[i]];
    labels[i] = s.label;
    if (model.views.src)
      detail::encode_ids(model.src_emb, model.src_conv, s.f.token_ids, 5,
                         &fused[i * fused_dim], &src_c[i]);
    if (model.views.ast)
      detail::encode_ids(model.ast_emb, model.ast_conv, s.f.ast_ids, 4,
                         &fused[i * fused_dim + src_out], &ast_c[i]);
    for (size_t d = 0; d < kStatDim; ++d) stats_in[i * kStatDim + d] = T(s.f.stats[d]);
  }
  std::vector<T> bn_out, stat_h;
  typename nn::BatchNorm<T>::Cache bn_cache;
  if (model.views.stat) {
    model.stat_bn.forward_train(stats_in, batch, bn_out, bn_cache);
    model.stat_proj.forward(bn_out, batch, stat_h);
    for (size_t i = 0; i < batch; ++i)
      for (size_t d = 0; d < stat_out; ++d)
        fused[i * fused_dim + stat_off + d] = stat_h[i * stat_out + d];
  }

  std::vector<T> hidden_pre, hidden_relu, hidden_drop, logits;
  model.fuse_hidden.forward(fused, batch, hidden_pre);
  nn::Relu<T> relu;
  relu.forward(hidden_pre, hidden_relu);
  Rng drng(dropout_seed);
  nn::Dropout<T> drop;
  drop.rate = model.drop.rate;
  drop.forward_train(hidden_relu, hidden_drop, drng);
  model.fuse_out.forward(hidden_drop, batch, logits);

  std::vector<T> p, dlogits;
  T loss = nn::softmax_cross_entropy(logits, labels, 2, p, dlogits);
  // The cross-entropy clamp would silently turn a NaN probability into a
  // large finite loss, so inspect the raw probabilities per sample.
  for (size_t i = 0; i < batch; ++i) {
    double py = double(p[i * 2 + size_t(labels[i])]);
    if (!std::isfinite(py)) throw HardError("non-finite loss at sample " + set[idx[i]].id);
  }
  if (!std::isfinite(double(loss))) throw HardError("non-finite loss");

  std::vector<T> d_drop_in, d_relu_in, d_hidden_pre, d_fused;
  model.fuse_out.backward(hidden_drop, batch, dlogits, d_drop_in);
  drop.backward(d_drop_in, d_relu_in);
  relu.backward(d_relu_in, d_hidden_pre);
  model.fuse_hidden.backward(fused, batch, d_hidden_pre, d_fused);

  if (model.views.stat) {
    std::vector<T> d_stat_h(batch * stat_out);
    for (size_t i = 0; i < batch; ++i)
      for (size_t d = 0; d < stat_out; ++d)
        d_stat_h[i * stat_out + d] = d_fused[i * fused_dim + stat_off + d];
    std::vector<T> d_bn_out, d_stats;
    model.stat_proj.backward(bn_out, batch, d_stat_h, d_bn_out);
    model.stat_bn.backward(bn_cache, d_bn_out, d_stats);
  }
  for (size_t i = 0; i < batch; ++i) {
    if (model.views.src)
      detail::backward_ids(model.src_emb, model.src_conv, src_c[i], &d_fused[i * fused_dim]);
    if (model.views.ast)
      detail::backward_ids(model.ast_emb, model.ast_conv, ast_c[i],
                           &d_fused[i * fused_dim + src_out]);
  }
  if (out_p) *out_p = p;
  return loss;
}

// Inference-path forward for one sample. Batch norm always uses running
// statistics here; training only toggles dropout (seeded, reproducible).
template <typename T>
void forward_one(const DetectorModelT<T>& model, const ThreeViewFeatures& f, bool training,
                 uint64_t rng_seed, std::array<T, 2>& logits_out, std::array<T, 2>& p_out,
                 std::vector<T>* fused_out = nullptr) {
  std::vector<T> fused(model.arch.fused(), T(0));
  detail::SeqCache<T>* no_cache = nullptr;
  if (model.views.src)
    detail::encode_ids(model.src_emb, model.src_conv, f.token_ids, 5, fused.data(), no_cache);
  if (model.views.ast)
    detail::encode_ids(model.ast_emb, model.ast_conv, f.ast_ids, 4,
                       fused.data() + model.arch.src_out(), no_cache);
  if (model.views.stat) {
    std::vector<T> sv(kStatDim), bn_out, stat_h;
    for (size_t d = 0; d < kStatDim; ++d) sv[d] = T(f.stats[d]);
    model.stat_bn.forward_eval(sv, 1, bn_out);
    model.stat_proj.forward(bn_out, 1, stat_h);
    const size_t stat_off = model.arch.src_out() + model.arch.ast_out();
    for (size_t d = 0; d < model.arch.stat_out_dim; ++d) fused[stat_off + d] = stat_h[d];
  }
  if (fused_out) *fused_out = fused;

  std::vector<T> hidden_pre, hidden_act, hidden_fin, logits;
  model.fuse_hidden.forward(fused, 1, hidden_pre);
  nn::Relu<T> relu;
  relu.forward(hidden_pre, hidden_act);
  if (training) {
    Rng drng(rng_seed);
    nn::Dropout<T> drop;
    drop.rate = model.drop.rate;
    drop.forward_train(hidden_act, hidden_fin, drng);
  } else {
    hidden_fin = hidden_act;
  }
  model.fuse_out.forward(hidden_fin, 1, logits);
  logits_out = {logits[0], logits[1]};
  T p[2];
  nn::softmax_row(logits.data(), 2, p);
  p_out = {p[0], p[1]};
}

template <typename T>
double score_features(const DetectorModelT<T>& model, const ThreeViewFeatures& f) {
  std::array<T, 2> logits, p;
  forward_one(model, f, false, 0, logits, p);
  return double(p[1]);
}

// Score raw bytes end to end: extraction with the model's frozen vocabulary
// and feature configuration, then the fused forward pass.
template <typename T>
double score_bytes(const DetectorModelT<T>& model, std::string_view raw) {
  return score_features(model, extract_features(raw, model.vocab, model.fcfg));
}

template <typename T>
Metrics evaluate(const DetectorModelT<T>& model, const Dataset& set, double delta = 0.5) {
  if (set.empty()) throw UsageError("evaluation set is empty");
  std::vector<double> q(set.size());
  std::vector<int> y(set.size());
  for (size_t i = 0; i < set.size(); ++i) {
    q[i] = score_features(model, set[i].f);
    y[i] = set[i].label;
  }
  return compute_metrics(q, y, delta);
}

template <typename T>
std::vector<std::vector<T>> fused_embeddings(const DetectorModelT<T>& model, const Dataset& set) {
  std::vector<std::vector<T>> rows(set.size());
  for (size_t i = 0; i < set.size(); ++i) {
    std::array<T, 2> logits, p;
    forward_one(model, set[i].f, false, 0, logits, p, &rows[i]);
  }
  return rows;
}

template <typename T>
TrainLog train_detector(DetectorModelT<T>& model, const Dataset& train, const Dataset& val,
                        const TrainHyper& hyper) {
  if (train.empty()) throw UsageError("training split is empty");
  if (val.empty()) throw UsageError("validation split is empty");
  bool has0 = false, has1 = false;
  for (const auto& s : train) (s.label ? has1 : has0) = true;
  if (!has0 || !has1) throw UsageError("training split must contain both labels");

  model.hyper = hyper;
  auto blocks = model.params();
  nn::AdamW<T> opt;
  opt.lr = T(hyper.lr);
  opt.weight_decay = T(hyper.weight_decay);
  opt.attach(blocks);

  TrainLog log;
  log.seed = model.seed;
  double best_f1 = -1.0;
  auto best_state = model.save_state();
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t(0));

  for (size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(model.seed, "shuffle", epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0;
    size_t batches = 0;
    size_t start = 0;
    while (start < order.size()) {
      size_t end = std::min(start + hyper.batch, order.size());
      if (order.size() - end == 1) end = order.size();  // avoid a batch-norm singleton
      std::vector<size_t> bidx(order.begin() + long(start), order.begin() + long(end));
      model.zero_grad();
      T loss =
          loss_and_grad(model, train, bidx, derive_seed(model.seed, "dropout", epoch * 1000003 + batches));
      opt.step(blocks);
      loss_sum += double(loss);
      ++batches;
      start = end;
    }
    Metrics m = evaluate(model, val, hyper.delta);
    log.epochs.push_back({loss_sum / double(batches), m});
    if (m.f1 > best_f1) {
      best_f1 = m.f1;
      log.best_epoch = epoch;
      best_state = model.save_state();
    }
  }
  model.load_state(best_state);
  return log;
}

// Fine-tuning pass over an augmented set: a fixed number of extra epochs with
// fresh optimizer state, keeping the final weights rather than rolling back to
// a best epoch. epoch_base offsets the shuffle and dropout streams so repeated
// refreshes of the same model do not replay them.
template <typename T>
TrainLog continue_training(DetectorModelT<T>& model, const Dataset& train, const Dataset& val,
                           size_t epochs, size_t epoch_base = 0) {
  if (train.empty()) throw UsageError("training split is empty");
  if (val.empty()) throw UsageError("validation split is empty");
  bool has0 = false, has1 = false;
  for (const auto& s : train) (s.label ? has1 : has0) = true;
  if (!has0 || !has1) throw UsageError("training split must contain both labels");

  auto blocks = model.params();
  nn::AdamW<T> opt;
  opt.lr = T(model.hyper.lr);
  opt.weight_decay = T(model.hyper.weight_decay);
  opt.attach(blocks);

  TrainLog log;
  log.seed = model.seed;
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t(0));

  for (size_t e = 0; e < epochs; ++e) {
    size_t epoch = epoch_base + e;
    Rng shuffle_rng(derive_seed(model.seed, "shuffle", epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0;
    size_t batches = 0;
    size_t start = 0;
    while (start < order.size()) {
      size_t end = std::min(start + model.hyper.batch, order.size());
      if (order.size() - end == 1) end = order.size();  // avoid a batch-norm singleton
      std::vector<size_t> bidx(order.begin() + long(start), order.begin() + long(end));
      model.zero_grad();
      T loss = loss_and_grad(model, train, bidx,
                             derive_seed(model.seed, "dropout", epoch * 1000003 + batches));
      opt.step(blocks);
      loss_sum += double(loss);
      ++batches;
      start = end;
    }
    Metrics m = evaluate(model, val, model.hyper.delta);
    log.epochs.push_back({loss_sum / double(batches), m});
  }
  log.best_epoch = log.epochs.empty() ? 0 : log.epochs.size() - 1;
  return log;
}

// Versioned checkpoint with a JSON sidecar. Tensors are float32 row-major.
void save_checkpoint(DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_checkpoint(const std::filesystem::path& path);

}  // namespace shellsift
