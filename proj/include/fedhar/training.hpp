#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fedhar/adam.hpp"
#include "fedhar/data.hpp"
#include "fedhar/losses.hpp"
#include "fedhar/model.hpp"

namespace fedhar {

// A client's data as the trainer sees it: standardized features (statistics
// fit on the client's train split only) with local and, when a vocabulary is
// given, global label indices.
struct LocalView {
  std::string user_id;
  std::vector<SampleFeatures> train_feat, test_feat;
  std::vector<int> train_local, test_local;
  std::vector<int> train_global, test_global;
  std::vector<std::string> activities;
  ChannelStats stats;

  std::size_t n_classes() const { return activities.size(); }
};

// What a personalization routine is allowed to see: the train split only.
struct TrainView {
  std::string user_id;
  const std::vector<SampleFeatures>* features = nullptr;
  const std::vector<int>* labels = nullptr;
  std::size_t n_classes = 0;
};

inline TrainView train_view(const LocalView& v) {
  return {v.user_id, &v.train_feat, &v.train_local, v.n_classes()};
}

inline LocalView make_view(const ClientDataset& c, const FeatureStore& store,
                           const std::vector<std::string>* vocabulary = nullptr) {
  require(!c.train_idx.empty(), "make_view: user " + c.user_id + " has an empty train split");
  LocalView v;
  v.user_id = c.user_id;
  v.activities = c.activities;

  std::vector<const SampleFeatures*> train_raw;
  for (int i : c.train_idx) train_raw.push_back(&store.of(c.samples[static_cast<std::size_t>(i)]));
  v.stats = ChannelStats::fit(train_raw);

  auto global_label = [&](const std::string& act) -> int {
    if (!vocabulary) return -1;
    auto it = std::lower_bound(vocabulary->begin(), vocabulary->end(), act);
    require(it != vocabulary->end() && *it == act,
            "make_view: activity missing from vocabulary: " + act);
    return static_cast<int>(it - vocabulary->begin());
  };

  for (int i : c.train_idx) {
    const auto& s = c.samples[static_cast<std::size_t>(i)];
    v.train_feat.push_back(v.stats.apply(store.of(s)));
    v.train_local.push_back(c.local_label(s.activity));
    v.train_global.push_back(global_label(s.activity));
  }
  for (int i : c.test_idx) {
    const auto& s = c.samples[static_cast<std::size_t>(i)];
    v.test_feat.push_back(v.stats.apply(store.of(s)));
    v.test_local.push_back(c.local_label(s.activity));
    v.test_global.push_back(global_label(s.activity));
  }
  return v;
}

// ---------------------------------------------------------------------------
// epochs
// ---------------------------------------------------------------------------

// One epoch of cross-entropy training of {embedding, head}; returns the mean
// per-sample loss.
inline double ce_epoch(const EmbeddingNet& net, const ClassifierHead& head, ParamSet& params,
                       AdamState& opt, const std::vector<SampleFeatures>& feats,
                       const std::vector<int>& labels, int batch_size, Rng& rng) {
  require(!feats.empty(), "ce_epoch: empty train set");
  require(feats.size() == labels.size(), "ce_epoch: feature/label count mismatch");
  std::vector<int> order(feats.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);

  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    const std::size_t bsz = end - start;
    std::vector<const SampleFeatures*> batch;
    batch.reserve(bsz);
    for (std::size_t i = start; i < end; ++i)
      batch.push_back(&feats[static_cast<std::size_t>(order[i])]);

    Tape tape;
    Tensor emb = net.forward(params, net.assemble_batch(batch), tape, Mode::train, &rng);
    Tape head_tape;
    Tensor logits = head.logits(params, emb, head_tape);
    Tensor probs = Softmax::softmax_rows(logits);

    Tensor dlogits({bsz, head.classes()});
    for (std::size_t n = 0; n < bsz; ++n) {
      const int label = labels[static_cast<std::size_t>(order[start + n])];
      require(label >= 0 && static_cast<std::size_t>(label) < head.classes(),
              "ce_epoch: label out of range");
      const double* row = probs.data() + n * head.classes();
      loss_sum += cross_entropy_onehot(static_cast<std::size_t>(label),
                                       std::span<const double>(row, head.classes()));
      for (std::size_t j = 0; j < head.classes(); ++j) {
        dlogits.at(n, j) =
            (probs.at(n, j) - (j == static_cast<std::size_t>(label) ? 1.0 : 0.0)) /
            static_cast<double>(bsz);
      }
    }

    ParamSet grads = params.zeros_like();
    Tensor gemb = head.backward(dlogits, head_tape, params, grads);
    net.backward(gemb, tape, params, grads);
    opt.step(params, grads);
  }
  return loss_sum / static_cast<double>(feats.size());
}

// One epoch of siamese pairwise training of the embedding; an epoch draws
// ceil(N / B) batches of B pairs. Returns the mean per-pair loss.
inline double pairwise_epoch(const EmbeddingNet& net, ParamSet& params, AdamState& opt,
                             const std::vector<SampleFeatures>& feats,
                             const std::vector<int>& labels, int pair_batch, SigmoidSlope slope,
                             Rng& rng) {
  require(feats.size() >= 2, "pairwise_epoch: need at least 2 train samples");
  require(feats.size() == labels.size(), "pairwise_epoch: feature/label count mismatch");
  const std::size_t n_batches =
      (feats.size() + static_cast<std::size_t>(pair_batch) - 1) /
      static_cast<std::size_t>(pair_batch);

  const std::size_t e = net.hyper().embed_dim;
  double loss_sum = 0.0;
  std::size_t n_pairs = 0;
  for (std::size_t b = 0; b < n_batches; ++b) {
    PairBatch pb = sample_pairs(labels, pair_batch, rng);
    std::vector<const SampleFeatures*> left, right;
    for (const auto& p : pb.pairs) {
      left.push_back(&feats[static_cast<std::size_t>(p.i)]);
      right.push_back(&feats[static_cast<std::size_t>(p.j)]);
    }
    Tape tape_l, tape_r;
    Tensor emb_l = net.forward(params, net.assemble_batch(left), tape_l, Mode::train, &rng);
    Tensor emb_r = net.forward(params, net.assemble_batch(right), tape_r, Mode::train, &rng);

    const double inv_b = 1.0 / static_cast<double>(pb.pairs.size());
    Tensor gl({pb.pairs.size(), e}), gr({pb.pairs.size(), e});
    std::vector<double> da(e), db(e);
    for (std::size_t p = 0; p < pb.pairs.size(); ++p) {
      std::span<const double> ei(emb_l.data() + p * e, e);
      std::span<const double> ej(emb_r.data() + p * e, e);
      const double phi = cosine(ei, ej);
      loss_sum += pairwise_loss(phi, pb.pairs[p].delta, slope);
      const double dphi = pairwise_loss_dphi(phi, pb.pairs[p].delta, slope) * inv_b;
      cosine_grad(ei, ej, da, db);
      for (std::size_t i = 0; i < e; ++i) {
        gl.at(p, i) = dphi * da[i];
        gr.at(p, i) = dphi * db[i];
      }
    }
    n_pairs += pb.pairs.size();

    ParamSet grads = params.zeros_like();
    net.backward(gl, tape_l, params, grads);
    net.backward(gr, tape_r, params, grads);
    opt.step(params, grads);
  }
  return loss_sum / static_cast<double>(n_pairs);
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

inline std::vector<std::vector<double>> embed_all(const EmbeddingNet& net, const ParamSet& params,
                                                  const std::vector<SampleFeatures>& feats,
                                                  int batch = 64) {
  std::vector<std::vector<double>> out;
  out.reserve(feats.size());
  const std::size_t e = net.hyper().embed_dim;
  for (std::size_t start = 0; start < feats.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(feats.size(), start + static_cast<std::size_t>(batch));
    std::vector<const SampleFeatures*> b;
    for (std::size_t i = start; i < end; ++i) b.push_back(&feats[i]);
    Tape tape;
    Tensor emb = net.forward(params, net.assemble_batch(b), tape, Mode::eval);
    for (std::size_t n = 0; n < b.size(); ++n)
      out.emplace_back(emb.data() + n * e, emb.data() + (n + 1) * e);
  }
  return out;
}

inline double classification_accuracy(const EmbeddingNet& net, const ClassifierHead& head,
                                      const ParamSet& params,
                                      const std::vector<SampleFeatures>& feats,
                                      const std::vector<int>& labels, int batch = 64) {
  require(!feats.empty(), "classification_accuracy: empty eval set");
  require(feats.size() == labels.size(), "classification_accuracy: size mismatch");
  std::size_t correct = 0;
  for (std::size_t start = 0; start < feats.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(feats.size(), start + static_cast<std::size_t>(batch));
    std::vector<const SampleFeatures*> b;
    for (std::size_t i = start; i < end; ++i) b.push_back(&feats[i]);
    Tape tape;
    Tensor emb = net.forward(params, net.assemble_batch(b), tape, Mode::eval);
    Tape head_tape;
    Tensor logits = head.logits(params, emb, head_tape);
    for (std::size_t n = 0; n < b.size(); ++n) {
      const int label = labels[start + n];
      require(label < static_cast<int>(head.classes()),
              "classification_accuracy: label exceeds head dimension");
      const double* row = logits.data() + n * head.classes();
      const std::size_t pred = argmax(std::span<const double>(row, head.classes()));
      if (label >= 0 && pred == static_cast<std::size_t>(label)) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(feats.size());
}

// Fraction of sampled test pairs whose cosine sign agrees with the
// same-class flag; a label-free progress metric for embedding training.
inline double pair_agreement(const EmbeddingNet& net, const ParamSet& params,
                             const std::vector<SampleFeatures>& feats,
                             const std::vector<int>& labels, int n_pairs, std::uint64_t seed) {
  if (feats.size() < 2) return 0.0;
  Rng rng(seed);
  PairBatch pb = sample_pairs(labels, n_pairs, rng);
  auto embs = embed_all(net, params, feats);
  std::size_t agree = 0;
  for (const auto& p : pb.pairs) {
    const double phi = cosine(embs[static_cast<std::size_t>(p.i)],
                              embs[static_cast<std::size_t>(p.j)]);
    if ((phi > 0.0) == (p.delta == 1)) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(pb.pairs.size());
}

// Fits a fresh softmax head on pre-computed (frozen) embeddings.
inline ParamSet train_head_frozen(const ClassifierHead& head,
                                  const std::vector<std::vector<double>>& embs,
                                  const std::vector<int>& labels, int epochs, int batch_size,
                                  AdamConfig adam_cfg, Rng& rng) {
  require(!embs.empty(), "train_head_frozen: empty train set");
  ParamSet params = head.init_params(rng);
  AdamState opt = AdamState::init(params, adam_cfg);
  const std::size_t e = embs.front().size();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<int> order(embs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      const std::size_t bsz = end - start;
      Tensor emb({bsz, e});
      for (std::size_t n = 0; n < bsz; ++n) {
        const auto& src = embs[static_cast<std::size_t>(order[start + n])];
        std::copy(src.begin(), src.end(), emb.data() + n * e);
      }
      Tape tape;
      Tensor logits = head.logits(params, emb, tape);
      Tensor probs = Softmax::softmax_rows(logits);
      Tensor dlogits({bsz, head.classes()});
      for (std::size_t n = 0; n < bsz; ++n) {
        const int label = labels[static_cast<std::size_t>(order[start + n])];
        for (std::size_t j = 0; j < head.classes(); ++j)
          dlogits.at(n, j) =
              (probs.at(n, j) - (j == static_cast<std::size_t>(label) ? 1.0 : 0.0)) /
              static_cast<double>(bsz);
      }
      ParamSet grads = params.zeros_like();
      head.backward(dlogits, tape, params, grads);
      opt.step(params, grads);
    }
  }
  return params;
}

}  // namespace fedhar
