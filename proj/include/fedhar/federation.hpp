#pragma once

#include <cmath>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "fedhar/training.hpp"

namespace fedhar {

enum class Scheme { central, fedavg, fedreptile, meta_har, meta_har_ce };

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "central") return Scheme::central;
  if (s == "fedavg") return Scheme::fedavg;
  if (s == "fedreptile") return Scheme::fedreptile;
  if (s == "meta_har") return Scheme::meta_har;
  if (s == "meta_har_ce") return Scheme::meta_har_ce;
  fail("unknown scheme: " + s);
}

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::central: return "central";
    case Scheme::fedavg: return "fedavg";
    case Scheme::fedreptile: return "fedreptile";
    case Scheme::meta_har: return "meta_har";
    case Scheme::meta_har_ce: return "meta_har_ce";
  }
  fail("bad scheme value");
}

// True when the scheme federates the classifier head along with the
// embedding; meta_har variants federate the embedding network only.
inline bool federates_head(Scheme s) {
  return s == Scheme::fedavg || s == Scheme::fedreptile || s == Scheme::central;
}

inline bool uses_pairwise_loss(Scheme s) { return s == Scheme::meta_har; }

struct FedConfig {
  int rounds = 200;
  int subset_size = 0;  // 0: max(2, ceil(n/3))
  double lambda = 1.0;
  int local_epochs = 2;  // m
  int batch_size = 64;
  SigmoidSlope slope{10.0};
  AdamConfig adam;
  bool weighted_mean = false;     // sample-count weighting (FedAvg option)
  bool reset_optimizer = false;   // per-round Adam reset
  int eval_interval = 1;
  int early_stop_patience = 20;   // evals without improvement; 0 disables
  bool parallel_clients = false;
  std::uint64_t master_seed = 1;
};

struct ServerState {
  ParamSet central;
  int round = 0;
  double lambda = 1.0;
};

struct ClientState {
  LocalView view;
  std::optional<AdamState> opt;  // persists across rounds
  ParamSet local_head;           // meta_har_ce: persistent per-client head
  bool skipped_last_round = false;
};

// Uniform sample of `size` client indices without replacement.
inline std::vector<int> select_clients(int n, int size, Rng& rng) {
  require(n >= 1, "select_clients: no clients");
  require(size >= 1 && size <= n, "select_clients: size out of range");
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < size; ++i) {
    const int j = i + rng.below_int(n - i);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(size));
  return idx;
}

// Server update: hat = mean(updates); central <- central + lambda*(hat - central),
// computed as (1-lambda)*central + lambda*hat. The mean is exactly invariant
// to the order of the update list. With weights, the weighted mean is used.
inline ParamSet aggregate(const std::vector<ParamSet>& updates, const ParamSet& central,
                          double lambda, const std::vector<double>* weights = nullptr) {
  require(!updates.empty(), "aggregate: no updates");
  require(lambda >= 0.0 && lambda <= 1.0, "aggregate: lambda must be in [0, 1]");
  for (const auto& u : updates) central.require_congruent(u, "aggregate");

  ParamSet hat;
  if (!weights) {
    hat = ParamSet::mean(updates);
  } else {
    require(weights->size() == updates.size(), "aggregate: weight count mismatch");
    double wsum = 0.0;
    for (double w : *weights) {
      require(w > 0.0, "aggregate: weights must be positive");
      wsum += w;
    }
    hat = central.zeros_like();
    std::vector<std::pair<double, double>> vals(updates.size());
    for (std::size_t i = 0; i < hat.size(); ++i) {
      Tensor& dst = hat.item(i).second;
      for (std::size_t e = 0; e < dst.size(); ++e) {
        for (std::size_t s = 0; s < updates.size(); ++s)
          vals[s] = {updates[s].item(i).second[e], (*weights)[s]};
        std::sort(vals.begin(), vals.end());
        double acc = 0.0;
        for (const auto& [v, w] : vals) acc += v * w;
        dst[e] = acc / wsum;
      }
    }
  }

  if (lambda == 1.0) return hat;
  if (lambda == 0.0) return central;
  ParamSet out = central;
  out.scale_(1.0 - lambda);
  out.axpy_(lambda, hat);
  out.check_finite("aggregate");
  return out;
}

// One client round: copy the broadcast snapshot, train m epochs with the
// scheme's loss, return the federated parameter subset. The snapshot itself
// is never mutated.
inline ParamSet local_update(ClientState& client, const ParamSet& snapshot, Scheme scheme,
                             const EmbeddingNet& net, const ClassifierHead* global_head,
                             const FedConfig& cfg, std::uint64_t round_seed,
                             double* train_loss = nullptr) {
  Rng rng(round_seed);
  const LocalView& view = client.view;

  if (uses_pairwise_loss(scheme)) {
    require(view.train_feat.size() >= 2, "local_update: pairwise loss needs >= 2 train samples");
  } else {
    require(!view.train_feat.empty(), "local_update: empty local train split");
  }

  ParamSet params = snapshot;
  std::unique_ptr<ClassifierHead> local_head;
  if (scheme == Scheme::meta_har_ce) {
    local_head = std::make_unique<ClassifierHead>(net.hyper().embed_dim, view.n_classes());
    if (client.local_head.empty()) {
      Rng head_rng(derive_seed(cfg.master_seed, "local_head", hash_str(view.user_id)));
      client.local_head = local_head->init_params(head_rng);
    }
    for (const auto& [name, t] : client.local_head) params.insert(name, t);
  }

  if (cfg.reset_optimizer || !client.opt.has_value() ||
      !client.opt->m.congruent_with(params)) {
    client.opt = AdamState::init(params, cfg.adam);
  }

  double loss = 0.0;
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    switch (scheme) {
      case Scheme::meta_har:
        loss = pairwise_epoch(net, params, *client.opt, view.train_feat, view.train_local,
                              cfg.batch_size, cfg.slope, rng);
        break;
      case Scheme::meta_har_ce:
        loss = ce_epoch(net, *local_head, params, *client.opt, view.train_feat, view.train_local,
                        cfg.batch_size, rng);
        break;
      case Scheme::fedavg:
      case Scheme::fedreptile:
        require(global_head != nullptr, "local_update: global head required");
        loss = ce_epoch(net, *global_head, params, *client.opt, view.train_feat,
                        view.train_global, cfg.batch_size, rng);
        break;
      case Scheme::central:
        fail("local_update: central scheme has no federated clients");
    }
  }
  if (train_loss) *train_loss = loss;

  if (scheme == Scheme::meta_har_ce) {
    client.local_head = params.subset_with_prefix("head.");
    ParamSet pushed = params.subset_with_prefix("embed.");
    return pushed;
  }
  return params;
}

struct RoundRecord {
  int round = 0;
  double train_loss = 0.0;
  std::vector<int> participants;
  std::vector<std::pair<std::string, double>> metrics;
};

// Per-round evaluation hook; the first returned metric drives early stopping.
using EvalFn = std::function<std::vector<std::pair<std::string, double>>(const ParamSet&, int)>;

// The federated round engine: select -> broadcast -> local updates ->
// aggregate. Deterministic for a fixed master seed regardless of client
// execution interleaving (per-client seeds are derived by stable hashing and
// the aggregation is order-invariant).
inline std::vector<RoundRecord> run_rounds(ServerState& server, std::vector<ClientState>& clients,
                                           Scheme scheme, const EmbeddingNet& net,
                                           const ClassifierHead* global_head,
                                           const FedConfig& cfg, EvalFn eval = nullptr) {
  require(!clients.empty(), "run_rounds: no clients");
  const int n = static_cast<int>(clients.size());
  const int subset =
      cfg.subset_size > 0
          ? cfg.subset_size
          : std::max(2, static_cast<int>(std::ceil(static_cast<double>(n) / 3.0)));
  require(subset <= n, "run_rounds: subset size exceeds client count");

  Rng select_rng(derive_seed(cfg.master_seed, "client_selection"));
  std::vector<RoundRecord> records;
  double best_metric = -1.0;
  int evals_since_best = 0;

  for (int round = 0; round < cfg.rounds; ++round) {
    std::vector<int> selected = select_clients(n, subset, select_rng);
    std::sort(selected.begin(), selected.end());

    std::vector<ParamSet> updates(selected.size());
    std::vector<double> losses(selected.size(), 0.0);
    std::vector<double> weights(selected.size(), 0.0);
    std::vector<char> ok(selected.size(), 0);

    auto run_one = [&](std::size_t slot) {
      const int ci = selected[slot];
      const std::uint64_t seed = derive_seed(cfg.master_seed, "round_client",
                                             static_cast<std::uint64_t>(round),
                                             static_cast<std::uint64_t>(ci));
      ClientState& client = clients[static_cast<std::size_t>(ci)];
      try {
        updates[slot] = local_update(client, server.central, scheme, net, global_head, cfg,
                                     seed, &losses[slot]);
        weights[slot] = static_cast<double>(client.view.train_feat.size());
        ok[slot] = 1;
        client.skipped_last_round = false;
      } catch (const std::exception&) {
        client.skipped_last_round = true;  // skip-on-error; round continues
      }
    };

    if (cfg.parallel_clients) {
      std::vector<std::future<void>> futs;
      for (std::size_t slot = 0; slot < selected.size(); ++slot)
        futs.push_back(std::async(std::launch::async, run_one, slot));
      for (auto& f : futs) f.get();
    } else {
      for (std::size_t slot = 0; slot < selected.size(); ++slot) run_one(slot);
    }

    std::vector<ParamSet> good_updates;
    std::vector<double> good_weights;
    double loss_sum = 0.0;
    for (std::size_t slot = 0; slot < selected.size(); ++slot) {
      if (!ok[slot]) continue;
      good_updates.push_back(std::move(updates[slot]));
      good_weights.push_back(weights[slot]);
      loss_sum += losses[slot];
    }
    require(!good_updates.empty(), "run_rounds: every selected client failed in round " +
                                       std::to_string(round));

    if (scheme == Scheme::meta_har || scheme == Scheme::meta_har_ce) {
      for (const auto& u : good_updates)
        for (const auto& [name, _] : u)
          require(name.rfind("embed.", 0) == 0,
                  "run_rounds: non-embedding parameter pushed under " + to_string(scheme) +
                      ": " + name);
    }

    server.central = aggregate(good_updates, server.central, server.lambda,
                               cfg.weighted_mean ? &good_weights : nullptr);
    server.round += 1;

    RoundRecord rec;
    rec.round = server.round;
    rec.train_loss = loss_sum / static_cast<double>(good_updates.size());
    rec.participants = selected;
    if (eval && (round % cfg.eval_interval == 0 || round + 1 == cfg.rounds)) {
      rec.metrics = eval(server.central, server.round);
      if (!rec.metrics.empty() && cfg.early_stop_patience > 0) {
        if (rec.metrics.front().second > best_metric + 1e-9) {
          best_metric = rec.metrics.front().second;
          evals_since_best = 0;
        } else {
          ++evals_since_best;
        }
      }
    }
    records.push_back(std::move(rec));
    if (cfg.early_stop_patience > 0 && evals_since_best >= cfg.early_stop_patience) break;
  }
  return records;
}

}  // namespace fedhar
