#pragma once

#include <string>
#include <vector>

#include "fedhar/training.hpp"

namespace fedhar {

struct PersonalizeConfig {
  int epochs = 3;  // applied to each stage
  int batch_size = 64;
  SigmoidSlope slope{10.0};
  AdamConfig adam;
  std::uint64_t seed = 1;
};

// A per-user personalized classifier: fine-tuned embedding plus a freshly
// initialized head over the user's own activity set.
struct PersonalModel {
  ParamSet embed;
  ParamSet head;
  std::string strategy;
  int epochs = 0;
  bool stage1_skipped = false;
};

namespace detail {

inline ParamSet fresh_head(const EmbeddingNet& net, std::size_t classes, std::uint64_t seed) {
  ClassifierHead head(net.hyper().embed_dim, classes);
  Rng rng(seed);
  return head.init_params(rng);
}

inline bool can_pairwise(const TrainView& user) {
  return user.features->size() >= 2;
}

// epochs of pairwise fine-tuning of the embedding on the user's train split
inline bool pairwise_stage(const EmbeddingNet& net, ParamSet& embed, const TrainView& user,
                           const PersonalizeConfig& cfg, std::uint64_t stage_seed) {
  if (!can_pairwise(user)) return false;  // single-sample user: stage skipped
  Rng rng(stage_seed);
  AdamState opt = AdamState::init(embed, cfg.adam);
  for (int e = 0; e < cfg.epochs; ++e)
    pairwise_epoch(net, embed, opt, *user.features, *user.labels, cfg.batch_size, cfg.slope, rng);
  return true;
}

}  // namespace detail

// Stage 1: pairwise fine-tuning of the embedding. Stage 2: attach a fresh
// head and jointly fine-tune {embedding, head} with cross-entropy.
inline PersonalModel two_stage(const EmbeddingNet& net, const TrainView& user,
                               const ParamSet& theta_c, const PersonalizeConfig& cfg) {
  require(!user.features->empty(), "two_stage: empty train split");
  require(cfg.epochs >= 1, "two_stage: epochs must be >= 1");
  PersonalModel out;
  out.strategy = "two_stage";
  out.epochs = cfg.epochs;

  ParamSet embed = theta_c;
  out.stage1_skipped = !detail::pairwise_stage(
      net, embed, user, cfg, derive_seed(cfg.seed, "stage1", hash_str(user.user_id)));

  ParamSet joint = embed;
  ParamSet head_init = detail::fresh_head(net, user.n_classes,
                                          derive_seed(cfg.seed, "head", hash_str(user.user_id)));
  for (const auto& [name, t] : head_init) joint.insert(name, t);

  ClassifierHead head(net.hyper().embed_dim, user.n_classes);
  Rng rng(derive_seed(cfg.seed, "stage2", hash_str(user.user_id)));
  AdamState opt = AdamState::init(joint, cfg.adam);
  for (int e = 0; e < cfg.epochs; ++e)
    ce_epoch(net, head, joint, opt, *user.features, *user.labels, cfg.batch_size, rng);

  out.embed = joint.subset_with_prefix("embed.");
  out.head = joint.subset_with_prefix("head.");
  return out;
}

// Single phase: attach a fresh head and jointly fine-tune with cross-entropy.
inline PersonalModel merged(const EmbeddingNet& net, const TrainView& user,
                            const ParamSet& theta_c, const PersonalizeConfig& cfg) {
  require(!user.features->empty(), "merged: empty train split");
  require(cfg.epochs >= 1, "merged: epochs must be >= 1");
  PersonalModel out;
  out.strategy = "merged";
  out.epochs = cfg.epochs;
  out.stage1_skipped = true;

  ParamSet joint = theta_c;
  ParamSet head_init = detail::fresh_head(net, user.n_classes,
                                          derive_seed(cfg.seed, "head", hash_str(user.user_id)));
  for (const auto& [name, t] : head_init) joint.insert(name, t);

  ClassifierHead head(net.hyper().embed_dim, user.n_classes);
  Rng rng(derive_seed(cfg.seed, "stage2", hash_str(user.user_id)));
  AdamState opt = AdamState::init(joint, cfg.adam);
  for (int e = 0; e < cfg.epochs; ++e)
    ce_epoch(net, head, joint, opt, *user.features, *user.labels, cfg.batch_size, rng);

  out.embed = joint.subset_with_prefix("embed.");
  out.head = joint.subset_with_prefix("head.");
  return out;
}

// Phase 1: pairwise fine-tuning of the embedding. Phase 2: the embedding is
// frozen and only the head is trained with cross-entropy.
inline PersonalModel separated(const EmbeddingNet& net, const TrainView& user,
                               const ParamSet& theta_c, const PersonalizeConfig& cfg) {
  require(!user.features->empty(), "separated: empty train split");
  require(cfg.epochs >= 1, "separated: epochs must be >= 1");
  PersonalModel out;
  out.strategy = "separated";
  out.epochs = cfg.epochs;

  out.embed = theta_c;
  out.stage1_skipped = !detail::pairwise_stage(
      net, out.embed, user, cfg, derive_seed(cfg.seed, "stage1", hash_str(user.user_id)));

  auto embs = embed_all(net, out.embed, *user.features);
  ClassifierHead head(net.hyper().embed_dim, user.n_classes);
  Rng rng(derive_seed(cfg.seed, "head", hash_str(user.user_id)));
  out.head = train_head_frozen(head, embs, *user.labels, cfg.epochs, cfg.batch_size, cfg.adam,
                               rng);
  return out;
}

// Head-only fit on the frozen global embedding (no fine-tuning at all).
inline PersonalModel fit_head_frozen(const EmbeddingNet& net, const TrainView& user,
                                     const ParamSet& theta_c, const PersonalizeConfig& cfg) {
  require(!user.features->empty(), "fit_head_frozen: empty train split");
  PersonalModel out;
  out.strategy = "head_only";
  out.epochs = cfg.epochs;
  out.stage1_skipped = true;
  out.embed = theta_c;
  auto embs = embed_all(net, out.embed, *user.features);
  ClassifierHead head(net.hyper().embed_dim, user.n_classes);
  Rng rng(derive_seed(cfg.seed, "head", hash_str(user.user_id)));
  out.head = train_head_frozen(head, embs, *user.labels, cfg.epochs, cfg.batch_size, cfg.adam,
                               rng);
  return out;
}

inline PersonalModel personalize(const std::string& strategy, const EmbeddingNet& net,
                                 const TrainView& user, const ParamSet& theta_c,
                                 const PersonalizeConfig& cfg) {
  if (strategy == "two_stage") return two_stage(net, user, theta_c, cfg);
  if (strategy == "merged") return merged(net, user, theta_c, cfg);
  if (strategy == "separated") return separated(net, user, theta_c, cfg);
  if (strategy == "head_only") return fit_head_frozen(net, user, theta_c, cfg);
  fail("unknown personalization strategy: " + strategy);
}

// Accuracy of a personal model on an evaluation set with local labels.
inline double personal_accuracy(const EmbeddingNet& net, const PersonalModel& model,
                                const std::vector<SampleFeatures>& feats,
                                const std::vector<int>& labels) {
  ClassifierHead head(net.hyper().embed_dim, model.head.at("head.fc.b").size());
  ParamSet joint = model.embed;
  for (const auto& [name, t] : model.head) joint.insert(name, t);
  return classification_accuracy(net, head, joint, feats, labels);
}

}  // namespace fedhar
