#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedhar/federation.hpp"
#include "fedhar/pca.hpp"
#include "fedhar/personalize.hpp"

namespace fedhar {

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  // dataset
  std::string dataset = "synthetic";  // synthetic | canonical | hhar | uschad
  std::string dataset_path;
  std::vector<std::string> activities;  // optional explicit global vocabulary
  // synthetic generator
  int synth_users = 8;
  int synth_classes = 4;
  int synth_per_class = 50;
  double synth_style = 1.0;
  double synth_noise = 0.25;
  // partitioning
  bool non_iid = false;
  int n_meta_test = 1;
  // preprocessing / model
  int intervals = 5;  // k
  int filters = 64;
  int embed_dim = 100;
  double dropout = 0.3;
  // training
  std::string scheme = "meta_har";
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int rounds = 200;  // federated rounds; training epochs for the central scheme
  int subset_size = 0;
  double lambda = 1.0;
  int local_epochs = 2;  // m
  int batch_size = 64;
  double slope = 10.0;  // pairwise sigmoid slope
  double learning_rate = 1e-3;
  double finetune_learning_rate = 1e-3;
  std::string strategy;  // two_stage | merged | separated | head_only (meta_har variants)
  int finetune_epochs = 3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-8;
  bool weighted_mean = false;
  bool reset_optimizer = false;
  int eval_interval = 1;
  int early_stop_patience = 20;
  bool parallel_seeds = false;
  bool parallel_clients = false;
  bool balanced_test = false;
  // output
  std::string run_dir;
  int checkpoint_interval = 0;

  std::string effective_strategy() const {
    if (!strategy.empty()) return strategy;
    return "two_stage";
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["dataset"] = dataset;
    j["dataset_path"] = dataset_path;
    j["activities"] = activities;
    j["synth_users"] = synth_users;
    j["synth_classes"] = synth_classes;
    j["synth_per_class"] = synth_per_class;
    j["synth_style"] = synth_style;
    j["synth_noise"] = synth_noise;
    j["non_iid"] = non_iid;
    j["n_meta_test"] = n_meta_test;
    j["intervals"] = intervals;
    j["filters"] = filters;
    j["embed_dim"] = embed_dim;
    j["dropout"] = dropout;
    j["scheme"] = scheme;
    j["seeds"] = seeds;
    j["rounds"] = rounds;
    j["subset_size"] = subset_size;
    j["lambda"] = lambda;
    j["local_epochs"] = local_epochs;
    j["batch_size"] = batch_size;
    j["slope"] = slope;
    j["learning_rate"] = learning_rate;
    j["finetune_learning_rate"] = finetune_learning_rate;
    j["strategy"] = strategy;
    j["finetune_epochs"] = finetune_epochs;
    j["adam_beta1"] = adam_beta1;
    j["adam_beta2"] = adam_beta2;
    j["adam_eps"] = adam_eps;
    j["weighted_mean"] = weighted_mean;
    j["reset_optimizer"] = reset_optimizer;
    j["eval_interval"] = eval_interval;
    j["early_stop_patience"] = early_stop_patience;
    j["parallel_seeds"] = parallel_seeds;
    j["parallel_clients"] = parallel_clients;
    j["balanced_test"] = balanced_test;
    j["run_dir"] = run_dir;
    j["checkpoint_interval"] = checkpoint_interval;
    return j;
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    const nlohmann::json defaults = c.to_json();
    for (const auto& [key, value] : j.items()) {
      require(defaults.contains(key), "config: unknown key: " + key);
      (void)value;
    }
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("dataset", c.dataset);
    get("dataset_path", c.dataset_path);
    get("activities", c.activities);
    get("synth_users", c.synth_users);
    get("synth_classes", c.synth_classes);
    get("synth_per_class", c.synth_per_class);
    get("synth_style", c.synth_style);
    get("synth_noise", c.synth_noise);
    get("non_iid", c.non_iid);
    get("n_meta_test", c.n_meta_test);
    get("intervals", c.intervals);
    get("filters", c.filters);
    get("embed_dim", c.embed_dim);
    get("dropout", c.dropout);
    get("scheme", c.scheme);
    get("seeds", c.seeds);
    get("rounds", c.rounds);
    get("subset_size", c.subset_size);
    get("lambda", c.lambda);
    get("local_epochs", c.local_epochs);
    get("batch_size", c.batch_size);
    get("slope", c.slope);
    get("learning_rate", c.learning_rate);
    get("finetune_learning_rate", c.finetune_learning_rate);
    get("strategy", c.strategy);
    get("finetune_epochs", c.finetune_epochs);
    get("adam_beta1", c.adam_beta1);
    get("adam_beta2", c.adam_beta2);
    get("adam_eps", c.adam_eps);
    get("weighted_mean", c.weighted_mean);
    get("reset_optimizer", c.reset_optimizer);
    get("eval_interval", c.eval_interval);
    get("early_stop_patience", c.early_stop_patience);
    get("parallel_seeds", c.parallel_seeds);
    get("parallel_clients", c.parallel_clients);
    get("balanced_test", c.balanced_test);
    get("run_dir", c.run_dir);
    get("checkpoint_interval", c.checkpoint_interval);
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream f(path);
    require(f.is_open(), "config: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return from_json(j);
  }

  void validate() const {
    require(!seeds.empty(), "config: seeds must be nonempty");
    require(rounds >= 0, "config: rounds must be >= 0");
    require(lambda >= 0.0 && lambda <= 1.0, "config: lambda must be in [0, 1]");
    require(local_epochs >= 1, "config: local_epochs must be >= 1");
    require(batch_size >= 1, "config: batch_size must be >= 1");
    require(slope > 0.0, "config: slope must be positive");
    require(intervals >= 1, "config: intervals must be >= 1");
    require(n_meta_test >= 0, "config: n_meta_test must be >= 0");
    scheme_from_string(scheme);  // throws on unknown scheme
    if (!strategy.empty()) {
      require(strategy == "two_stage" || strategy == "merged" || strategy == "separated" ||
                  strategy == "head_only",
              "config: unknown strategy: " + strategy);
    }
  }

  AdamConfig adam(double lr) const { return {lr, adam_beta1, adam_beta2, adam_eps}; }

  FedConfig fed_config(std::uint64_t seed) const {
    FedConfig f;
    f.rounds = rounds;
    f.subset_size = subset_size;
    f.lambda = lambda;
    f.local_epochs = local_epochs;
    f.batch_size = batch_size;
    f.slope = SigmoidSlope{slope};
    f.adam = adam(learning_rate);
    f.weighted_mean = weighted_mean;
    f.reset_optimizer = reset_optimizer;
    f.eval_interval = eval_interval;
    f.early_stop_patience = early_stop_patience;
    f.parallel_clients = parallel_clients;
    f.master_seed = seed;
    return f;
  }

  PersonalizeConfig personalize_config(std::uint64_t seed) const {
    PersonalizeConfig p;
    p.epochs = finetune_epochs;
    p.batch_size = batch_size;
    p.slope = SigmoidSlope{slope};
    p.adam = adam(finetune_learning_rate);
    p.seed = derive_seed(seed, "personalize");
    return p;
  }
};

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

// Sample-count-weighted mean accuracy.
inline double weighted_accuracy(const std::vector<std::pair<double, std::size_t>>& per_user) {
  require(!per_user.empty(), "weighted_accuracy: empty list");
  double num = 0.0, den = 0.0;
  for (const auto& [acc, m] : per_user) {
    require(m >= 1, "weighted_accuracy: weight must be >= 1");
    require(acc >= 0.0 && acc <= 1.0, "weighted_accuracy: accuracy out of [0, 1]");
    num += static_cast<double>(m) * acc;
    den += static_cast<double>(m);
  }
  return num / den;
}

struct UserEvalRecord {
  std::string user;
  std::string split;  // meta_train | meta_test
  std::string model;  // global | personal
  std::size_t n_test = 0;
  double accuracy = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double meta_train_acc = std::nan("");
  double meta_test_acc = std::nan("");
  std::vector<UserEvalRecord> users;
  std::vector<RoundRecord> rounds;
};

struct ExperimentReport {
  nlohmann::json config_echo;
  std::vector<SeedResult> seeds;
  double mean_meta_train = std::nan("");
  double std_meta_train = std::nan("");
  double mean_meta_test = std::nan("");
  double std_meta_test = std::nan("");
};

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {std::nan(""), std::nan("")};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m) * (x - m);
  var /= static_cast<double>(xs.size());
  return {m, std::sqrt(var)};
}

// ---------------------------------------------------------------------------
// per-seed pipeline
// ---------------------------------------------------------------------------

struct SeedContext {
  FederationSplit split;
  FeatureStore store;
  std::unique_ptr<EmbeddingNet> net;
  std::vector<LocalView> train_views;  // meta-train users
  std::vector<LocalView> test_views;   // meta-test users
  std::vector<std::string> vocabulary;
};

// Evaluation subsampling for unbalanced datasets: per user, keep an equal
// per-class number of test samples (the minimum class count).
inline void balance_test_split(LocalView& v, std::uint64_t seed) {
  if (v.test_feat.empty()) return;
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < v.test_local.size(); ++i)
    by_class[v.test_local[i]].push_back(i);
  std::size_t m = v.test_feat.size();
  for (const auto& [_, idx] : by_class) m = std::min(m, idx.size());
  Rng rng(derive_seed(seed, "balance_test", hash_str(v.user_id)));
  std::vector<std::size_t> keep;
  for (auto& [_, idx] : by_class) {
    std::vector<std::size_t> shuffled = idx;
    rng.shuffle(shuffled);
    keep.insert(keep.end(), shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(m));
  }
  std::sort(keep.begin(), keep.end());
  std::vector<SampleFeatures> feat;
  std::vector<int> local, global;
  for (std::size_t i : keep) {
    feat.push_back(std::move(v.test_feat[i]));
    local.push_back(v.test_local[i]);
    global.push_back(v.test_global[i]);
  }
  v.test_feat = std::move(feat);
  v.test_local = std::move(local);
  v.test_global = std::move(global);
}

inline std::vector<ClientDataset> build_users(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::vector<ClientDataset> users;
  if (cfg.dataset == "synthetic") {
    SynthConfig sc;
    sc.n_users = cfg.synth_users;
    sc.n_classes = cfg.synth_classes;
    sc.style_strength = cfg.synth_style;
    sc.noise_level = cfg.synth_noise;
    Rng spec_rng(derive_seed(seed, "synth_specs"));
    auto specs = build_user_specs(sc, spec_rng);
    Rng data_rng(derive_seed(seed, "synth_data"));
    users = synth_generate(specs, cfg.synth_per_class, data_rng);
  } else {
    auto samples = load_dataset(cfg.dataset_path, cfg.dataset);
    users = group_by_user(samples, derive_seed(seed, "user_split"));
  }
  if (cfg.non_iid) {
    Rng rng(derive_seed(seed, "non_iid"));
    users = non_iid_partition(users, rng);
  }
  reindex_all(users);
  return users;
}

inline SeedContext build_context(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedContext ctx;
  auto users = build_users(cfg, seed);
  ctx.store = FeatureStore::build(users, cfg.intervals);
  Rng split_rng(derive_seed(seed, "meta_split"));
  ctx.split = split_meta(users, cfg.n_meta_test, split_rng);
  ctx.vocabulary = cfg.activities.empty() ? ctx.split.vocabulary : cfg.activities;
  std::sort(ctx.vocabulary.begin(), ctx.vocabulary.end());

  require(!ctx.split.meta_train.empty(), "build_context: no meta-train users");
  const auto& first = ctx.split.meta_train.front();
  require(!first.samples.empty(), "build_context: empty user");
  const SampleFeatures& example = ctx.store.of(first.samples.front());
  ctx.net = std::make_unique<EmbeddingNet>(EmbeddingHyper::infer(
      example, ctx.store.sensor_names, static_cast<std::size_t>(cfg.filters),
      static_cast<std::size_t>(cfg.embed_dim), cfg.dropout));

  for (const auto& u : ctx.split.meta_train)
    ctx.train_views.push_back(make_view(u, ctx.store, &ctx.vocabulary));
  for (const auto& u : ctx.split.meta_test)
    ctx.test_views.push_back(make_view(u, ctx.store, &ctx.vocabulary));
  if (cfg.balanced_test) {
    for (auto& v : ctx.train_views) balance_test_split(v, seed);
    for (auto& v : ctx.test_views) balance_test_split(v, seed);
  }
  return ctx;
}

namespace detail {

inline double weighted_acc_over(
    const std::vector<std::pair<double, std::size_t>>& entries) {
  if (entries.empty()) return std::nan("");
  return weighted_accuracy(entries);
}

// Global-model accuracy over a set of views (global labels).
inline double global_model_accuracy(const EmbeddingNet& net, const ClassifierHead& head,
                                    const ParamSet& params, const std::vector<LocalView>& views) {
  std::vector<std::pair<double, std::size_t>> entries;
  for (const auto& v : views) {
    if (v.test_feat.empty()) continue;
    entries.emplace_back(
        classification_accuracy(net, head, params, v.test_feat, v.test_global),
        v.test_feat.size());
  }
  return weighted_acc_over(entries);
}

inline double mean_pair_agreement(const EmbeddingNet& net, const ParamSet& params,
                                  const std::vector<LocalView>& views, std::uint64_t seed) {
  std::vector<std::pair<double, std::size_t>> entries;
  for (const auto& v : views) {
    if (v.test_feat.size() < 2) continue;
    entries.emplace_back(pair_agreement(net, params, v.test_feat, v.test_local, 64,
                                        derive_seed(seed, "pair_eval", hash_str(v.user_id))),
                         v.test_feat.size());
  }
  const double acc = weighted_acc_over(entries);
  return std::isnan(acc) ? 0.0 : acc;
}

// Pooled training data for the central scheme: statistics are fit on the
// pooled meta-train train split and applied to every evaluation split.
struct PooledData {
  ChannelStats stats;
  std::vector<SampleFeatures> train_feat;
  std::vector<int> train_global;
  struct Eval {
    std::string user;
    std::string split;
    std::vector<SampleFeatures> feat;
    std::vector<int> global_labels;
  };
  std::vector<Eval> evals;
};

inline PooledData build_pooled(const SeedContext& ctx, const ExperimentConfig& cfg,
                               std::uint64_t seed) {
  PooledData p;
  std::vector<const SampleFeatures*> raw_train;
  for (const auto& u : ctx.split.meta_train)
    for (int i : u.train_idx)
      raw_train.push_back(&ctx.store.of(u.samples[static_cast<std::size_t>(i)]));
  p.stats = ChannelStats::fit(raw_train);

  auto global_label = [&](const std::string& act) {
    auto it = std::lower_bound(ctx.vocabulary.begin(), ctx.vocabulary.end(), act);
    require(it != ctx.vocabulary.end() && *it == act,
            "central: activity missing from vocabulary: " + act);
    return static_cast<int>(it - ctx.vocabulary.begin());
  };

  for (const auto& u : ctx.split.meta_train) {
    for (int i : u.train_idx) {
      const auto& s = u.samples[static_cast<std::size_t>(i)];
      p.train_feat.push_back(p.stats.apply(ctx.store.of(s)));
      p.train_global.push_back(global_label(s.activity));
    }
  }
  auto add_eval = [&](const ClientDataset& u, const std::string& split) {
    PooledData::Eval e;
    e.user = u.user_id;
    e.split = split;
    for (int i : u.test_idx) {
      const auto& s = u.samples[static_cast<std::size_t>(i)];
      e.feat.push_back(p.stats.apply(ctx.store.of(s)));
      e.global_labels.push_back(global_label(s.activity));
    }
    p.evals.push_back(std::move(e));
  };
  for (const auto& u : ctx.split.meta_train) add_eval(u, "meta_train");
  for (const auto& u : ctx.split.meta_test) add_eval(u, "meta_test");
  (void)cfg;
  (void)seed;
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// scheme runners
// ---------------------------------------------------------------------------

inline SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedResult result;
  result.seed = seed;
  SeedContext ctx = build_context(cfg, seed);
  const Scheme scheme = scheme_from_string(cfg.scheme);
  const EmbeddingNet& net = *ctx.net;
  const std::size_t n_vocab = ctx.vocabulary.size();

  Rng init_rng(derive_seed(seed, "init"));
  const FedConfig fed = cfg.fed_config(seed);

  auto finish = [&](const std::vector<UserEvalRecord>& users) {
    result.users = users;
    std::vector<std::pair<double, std::size_t>> train_entries, test_entries;
    for (const auto& r : users) {
      if (r.n_test == 0) continue;
      if (r.split == "meta_train")
        train_entries.emplace_back(r.accuracy, r.n_test);
      else
        test_entries.emplace_back(r.accuracy, r.n_test);
    }
    result.meta_train_acc = detail::weighted_acc_over(train_entries);
    result.meta_test_acc = detail::weighted_acc_over(test_entries);
  };

  if (scheme == Scheme::central) {
    detail::PooledData pooled = detail::build_pooled(ctx, cfg, seed);
    ClassifierHead head(net.hyper().embed_dim, n_vocab);
    ParamSet params = net.init_params(init_rng);
    for (const auto& [name, t] : head.init_params(init_rng)) params.insert(name, t);
    AdamState opt = AdamState::init(params, cfg.adam(cfg.learning_rate));
    Rng train_rng(derive_seed(seed, "central_train"));
    for (int epoch = 0; epoch < cfg.rounds; ++epoch) {
      const double loss = ce_epoch(net, head, params, opt, pooled.train_feat,
                                   pooled.train_global, cfg.batch_size, train_rng);
      RoundRecord rec;
      rec.round = epoch + 1;  // central scale: training epochs
      rec.train_loss = loss;
      if (epoch % cfg.eval_interval == 0 || epoch + 1 == cfg.rounds) {
        std::vector<std::pair<double, std::size_t>> entries;
        for (const auto& e : pooled.evals) {
          if (e.feat.empty() || e.split != "meta_train") continue;
          entries.emplace_back(
              classification_accuracy(net, head, params, e.feat, e.global_labels),
              e.feat.size());
        }
        rec.metrics.emplace_back("train_users_acc", detail::weighted_acc_over(entries));
      }
      result.rounds.push_back(std::move(rec));
    }
    std::vector<UserEvalRecord> users;
    for (const auto& e : pooled.evals) {
      if (e.feat.empty()) continue;
      users.push_back({e.user, e.split, "global", e.feat.size(),
                       classification_accuracy(net, head, params, e.feat, e.global_labels)});
    }
    finish(users);
    return result;
  }

  // federated schemes
  std::vector<ClientState> clients;
  for (const auto& v : ctx.train_views) clients.push_back(ClientState{v, std::nullopt, {}, false});

  ServerState server;
  server.lambda = cfg.lambda;
  server.central = net.init_params(init_rng);
  std::unique_ptr<ClassifierHead> global_head;
  if (federates_head(scheme)) {
    global_head = std::make_unique<ClassifierHead>(net.hyper().embed_dim, n_vocab);
    for (const auto& [name, t] : global_head->init_params(init_rng)) server.central.insert(name, t);
  }

  EvalFn eval;
  if (federates_head(scheme)) {
    eval = [&](const ParamSet& params, int) {
      std::vector<std::pair<std::string, double>> m;
      m.emplace_back("train_users_acc",
                     detail::global_model_accuracy(net, *global_head, params, ctx.train_views));
      if (!ctx.test_views.empty())
        m.emplace_back("meta_test_acc",
                       detail::global_model_accuracy(net, *global_head, params, ctx.test_views));
      return m;
    };
  } else {
    eval = [&](const ParamSet& params, int round) {
      std::vector<std::pair<std::string, double>> m;
      m.emplace_back("train_pair_agreement",
                     detail::mean_pair_agreement(net, params, ctx.train_views,
                                                 derive_seed(seed, "round_eval",
                                                             static_cast<std::uint64_t>(round))));
      return m;
    };
  }

  result.rounds = run_rounds(server, clients, scheme, net, global_head.get(), fed, eval);

  std::vector<UserEvalRecord> users;
  auto eval_global_user = [&](const LocalView& v, const std::string& split) {
    if (v.test_feat.empty()) return;
    users.push_back({v.user_id, split, "global", v.test_feat.size(),
                     classification_accuracy(net, *global_head, server.central, v.test_feat,
                                             v.test_global)});
  };

  if (scheme == Scheme::fedavg) {
    for (const auto& v : ctx.train_views) eval_global_user(v, "meta_train");
    for (const auto& v : ctx.test_views) eval_global_user(v, "meta_test");
  } else if (scheme == Scheme::fedreptile) {
    // personalization: per user, fine-tune the full classifier with
    // cross-entropy on the local train split
    auto personalize_user = [&](const LocalView& v, const std::string& split) {
      if (v.test_feat.empty()) return;
      ParamSet params = server.central;
      AdamState opt = AdamState::init(params, cfg.adam(cfg.finetune_learning_rate));
      Rng rng(derive_seed(seed, "reptile_ft", hash_str(v.user_id)));
      for (int e = 0; e < cfg.finetune_epochs; ++e)
        ce_epoch(net, *global_head, params, opt, v.train_feat, v.train_global, cfg.batch_size,
                 rng);
      users.push_back({v.user_id, split, "personal", v.test_feat.size(),
                       classification_accuracy(net, *global_head, params, v.test_feat,
                                               v.test_global)});
    };
    for (const auto& v : ctx.train_views) personalize_user(v, "meta_train");
    for (const auto& v : ctx.test_views) personalize_user(v, "meta_test");
  } else {
    // meta_har / meta_har_ce: strategy-based personalization onto the
    // meta-learned embedding
    const PersonalizeConfig pcfg = cfg.personalize_config(seed);
    const std::string strategy = cfg.effective_strategy();
    auto personalize_user = [&](const LocalView& v, const std::string& split) {
      if (v.test_feat.empty()) return;
      PersonalModel pm = personalize(strategy, net, train_view(v), server.central, pcfg);
      users.push_back({v.user_id, split, "personal", v.test_feat.size(),
                       personal_accuracy(net, pm, v.test_feat, v.test_local)});
    };
    for (const auto& v : ctx.train_views) personalize_user(v, "meta_train");
    for (const auto& v : ctx.test_views) personalize_user(v, "meta_test");
  }

  finish(users);

  if (!cfg.run_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(cfg.run_dir) / ("seed_" + std::to_string(seed)));
    server.central.save((fs::path(cfg.run_dir) / ("seed_" + std::to_string(seed)) /
                         "central.fhps").string());
  }
  return result;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentReport report;
  report.config_echo = cfg.to_json();
  report.seeds.resize(cfg.seeds.size());

  if (cfg.parallel_seeds && cfg.seeds.size() > 1) {
    std::vector<std::future<SeedResult>> futs;
    for (std::uint64_t s : cfg.seeds)
      futs.push_back(std::async(std::launch::async, [&cfg, s] { return run_seed(cfg, s); }));
    for (std::size_t i = 0; i < futs.size(); ++i) report.seeds[i] = futs[i].get();
  } else {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
      report.seeds[i] = run_seed(cfg, cfg.seeds[i]);
  }

  std::vector<double> train_accs, test_accs;
  for (const auto& r : report.seeds) {
    if (!std::isnan(r.meta_train_acc)) train_accs.push_back(r.meta_train_acc);
    if (!std::isnan(r.meta_test_acc)) test_accs.push_back(r.meta_test_acc);
  }
  std::tie(report.mean_meta_train, report.std_meta_train) = mean_std(train_accs);
  std::tie(report.mean_meta_test, report.std_meta_test) = mean_std(test_accs);
  return report;
}

// ---------------------------------------------------------------------------
// heterogeneity demonstration
// ---------------------------------------------------------------------------

struct DemoResult {
  struct PcaRow {
    std::string user;
    std::string activity;
    double x = 0.0;
    double y = 0.0;
  };
  std::vector<PcaRow> pca;
  // scheme -> (scale name, per-round records); central records count epochs
  std::vector<std::tuple<std::string, std::string, std::vector<RoundRecord>>> traces;
  std::map<std::string, double> final_accuracy;
};

inline DemoResult demo_heterogeneity(const ExperimentConfig& cfg, std::uint64_t seed) {
  DemoResult demo;
  auto users = build_users(cfg, seed);
  require(users.size() >= 2, "demo_heterogeneity: need at least 2 users");
  FeatureStore store = FeatureStore::build(users, cfg.intervals);

  // PCA of handcrafted features, tagged by user and activity
  std::vector<std::vector<double>> feats;
  std::vector<std::pair<std::string, std::string>> tags;
  for (const auto& u : users) {
    for (const auto& s : u.samples) {
      feats.push_back(handcrafted(s).flat());
      tags.emplace_back(u.user_id, s.activity);
    }
  }
  auto projected = pca_project(feats);
  for (std::size_t i = 0; i < projected.size(); ++i)
    demo.pca.push_back({tags[i].first, tags[i].second, projected[i][0], projected[i][1]});

  // training traces with a shared experiment setup: all users participate,
  // the global model is scored on every user's test split
  auto run_scheme = [&](const std::string& label, const std::string& scheme,
                        const std::vector<ClientDataset>& population,
                        const std::string& scale) {
    ExperimentConfig sub = cfg;
    sub.scheme = scheme;
    sub.n_meta_test = 0;
    sub.non_iid = false;
    sub.run_dir.clear();
    sub.seeds = {seed};

    SeedContext ctx;
    ctx.store = FeatureStore::build(population, sub.intervals);
    Rng split_rng(derive_seed(seed, "meta_split"));
    ctx.split = split_meta(population, 0, split_rng);
    ctx.vocabulary = ctx.split.vocabulary;
    const SampleFeatures& example = ctx.store.of(ctx.split.meta_train.front().samples.front());
    ctx.net = std::make_unique<EmbeddingNet>(EmbeddingHyper::infer(
        example, ctx.store.sensor_names, static_cast<std::size_t>(sub.filters),
        static_cast<std::size_t>(sub.embed_dim), sub.dropout));
    for (const auto& u : ctx.split.meta_train)
      ctx.train_views.push_back(make_view(u, ctx.store, &ctx.vocabulary));

    const EmbeddingNet& net = *ctx.net;
    Rng init_rng(derive_seed(seed, "init"));

    if (scheme == "central") {
      detail::PooledData pooled = detail::build_pooled(ctx, sub, seed);
      ClassifierHead head(net.hyper().embed_dim, ctx.vocabulary.size());
      ParamSet params = net.init_params(init_rng);
      for (const auto& [name, t] : head.init_params(init_rng)) params.insert(name, t);
      AdamState opt = AdamState::init(params, sub.adam(sub.learning_rate));
      Rng train_rng(derive_seed(seed, "central_train"));
      std::vector<RoundRecord> records;
      for (int epoch = 0; epoch < sub.rounds; ++epoch) {
        RoundRecord rec;
        rec.round = epoch + 1;
        rec.train_loss = ce_epoch(net, head, params, opt, pooled.train_feat, pooled.train_global,
                                  sub.batch_size, train_rng);
        std::vector<std::pair<double, std::size_t>> entries;
        for (const auto& e : pooled.evals)
          if (!e.feat.empty())
            entries.emplace_back(
                classification_accuracy(net, head, params, e.feat, e.global_labels),
                e.feat.size());
        rec.metrics.emplace_back("global_acc", detail::weighted_acc_over(entries));
        records.push_back(std::move(rec));
      }
      demo.final_accuracy[label] = records.back().metrics.front().second;
      demo.traces.emplace_back(label, scale, std::move(records));
      return;
    }

    std::vector<ClientState> clients;
    for (const auto& v : ctx.train_views)
      clients.push_back(ClientState{v, std::nullopt, {}, false});
    ServerState server;
    server.lambda = sub.lambda;
    server.central = net.init_params(init_rng);
    ClassifierHead head(net.hyper().embed_dim, ctx.vocabulary.size());
    for (const auto& [name, t] : head.init_params(init_rng)) server.central.insert(name, t);
    EvalFn eval = [&](const ParamSet& params, int) {
      std::vector<std::pair<std::string, double>> m;
      m.emplace_back("global_acc",
                     detail::global_model_accuracy(net, head, params, ctx.train_views));
      return m;
    };
    FedConfig fed = sub.fed_config(seed);
    fed.early_stop_patience = 0;  // traces cover every configured round
    auto records = run_rounds(server, clients, Scheme::fedavg, net, &head, fed, eval);
    demo.final_accuracy[label] = records.back().metrics.front().second;
    demo.traces.emplace_back(label, scale, std::move(records));
  };

  run_scheme("central", "central", users, "epoch");
  run_scheme("fedavg_user", "fedavg", users, "round");
  Rng shuffle_rng(derive_seed(seed, "shuffle"));
  auto shuffled = shuffle_redistribute(users, shuffle_rng);
  run_scheme("fedavg_shuffle", "fedavg", shuffled, "round");
  return demo;
}

}  // namespace fedhar
