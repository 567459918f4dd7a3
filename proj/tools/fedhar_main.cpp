// fedhar command line: experiment harness for federated representation
// learning on sensor time series.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "fedhar/fedhar.hpp"
#include "fedhar/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_override_value(const std::string& raw) {
  try {
    return json::parse(raw);  // numbers, booleans, arrays, quoted strings
  } catch (const std::exception&) {
    return json(raw);  // bare string
  }
}

fedhar::ExperimentConfig load_config(const std::string& path,
                                     const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream f(path);
    fedhar::require(f.is_open(), "cannot open config: " + path);
    f >> j;
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    fedhar::require(eq != std::string::npos, "override must be key=value: " + kv);
    j[kv.substr(0, eq)] = parse_override_value(kv.substr(eq + 1));
  }
  return fedhar::ExperimentConfig::from_json(j);
}

void emit(const json& j) { std::cout << j.dump() << "\n"; }

int cmd_preprocess(const std::string& input, const std::string& format,
                   const std::string& output, const std::string& features_out, int intervals) {
  fedhar::LoadStats stats;
  auto samples = fedhar::load_dataset(input, format, &stats);
  fedhar::save_canonical(output, samples);
  if (!features_out.empty()) {
    std::ofstream f(features_out);
    fedhar::require(f.is_open(), "cannot open " + features_out);
    for (const auto& s : samples) {
      auto feats = fedhar::preprocess(s, intervals);
      json j{{"user_id", s.user_id}, {"activity", s.activity}};
      json sensors = json::array();
      for (std::size_t i = 0; i < feats.per_sensor.size(); ++i) {
        const auto& t = feats.per_sensor[i];
        sensors.push_back({{"name", s.sensors[i].name},
                           {"shape", t.shape()},
                           {"data", std::vector<double>(t.data(), t.data() + t.size())}});
      }
      j["sensors"] = std::move(sensors);
      f << j.dump() << "\n";
    }
  }
  emit({{"type", "preprocess_done"},
        {"accepted", stats.accepted},
        {"malformed", stats.malformed},
        {"output", output}});
  return 0;
}

int cmd_partition(const fedhar::ExperimentConfig& cfg, std::uint64_t seed,
                  const std::string& output) {
  auto users = fedhar::build_users(cfg, seed);
  fedhar::Rng split_rng(fedhar::derive_seed(seed, "meta_split"));
  auto split = fedhar::split_meta(users, cfg.n_meta_test, split_rng);

  std::ofstream f(output);
  fedhar::require(f.is_open(), "cannot open " + output);
  auto dump_user = [&](const fedhar::ClientDataset& u, const std::string& role) {
    json j{{"type", "user"},
           {"user", u.user_id},
           {"role", role},
           {"activities", u.activities},
           {"n_train", u.train_idx.size()},
           {"n_test", u.test_idx.size()}};
    std::vector<std::int64_t> train_ids, test_ids;
    for (int i : u.train_idx) train_ids.push_back(u.samples[static_cast<std::size_t>(i)].index);
    for (int i : u.test_idx) test_ids.push_back(u.samples[static_cast<std::size_t>(i)].index);
    j["train_sample_ids"] = train_ids;
    j["test_sample_ids"] = test_ids;
    f << j.dump() << "\n";
  };
  for (const auto& u : split.meta_train) dump_user(u, "meta_train");
  for (const auto& u : split.meta_test) dump_user(u, "meta_test");
  f << json{{"type", "vocabulary"}, {"activities", split.vocabulary}, {"seed", seed}}.dump()
    << "\n";
  emit({{"type", "partition_done"}, {"output", output}, {"users", users.size()}});
  return 0;
}

int cmd_train(const fedhar::ExperimentConfig& cfg) {
  auto report = fedhar::run_experiment(cfg);
  if (!cfg.run_dir.empty()) fedhar::write_report(cfg.run_dir, report);
  json j{{"type", "experiment_done"}, {"scheme", cfg.scheme}};
  if (!std::isnan(report.mean_meta_train)) {
    j["meta_train_mean"] = report.mean_meta_train;
    j["meta_train_std"] = report.std_meta_train;
  }
  if (!std::isnan(report.mean_meta_test)) {
    j["meta_test_mean"] = report.mean_meta_test;
    j["meta_test_std"] = report.std_meta_test;
  }
  emit(j);
  return 0;
}

int cmd_personalize(const fedhar::ExperimentConfig& cfg, std::uint64_t seed,
                    const std::string& checkpoint, const std::string& out_dir) {
  auto ctx = fedhar::build_context(cfg, seed);
  fedhar::ParamSet central = fedhar::ParamSet::load(checkpoint);
  fedhar::ParamSet theta = central.subset_with_prefix("embed.");
  const auto pcfg = cfg.personalize_config(seed);
  const std::string strategy = cfg.effective_strategy();
  if (!out_dir.empty()) fs::create_directories(out_dir);

  auto handle = [&](const fedhar::LocalView& v, const std::string& split) {
    auto pm = fedhar::personalize(strategy, *ctx.net, fedhar::train_view(v), theta, pcfg);
    const double train_acc =
        fedhar::personal_accuracy(*ctx.net, pm, v.train_feat, v.train_local);
    const double test_acc =
        v.test_feat.empty() ? 0.0
                            : fedhar::personal_accuracy(*ctx.net, pm, v.test_feat, v.test_local);
    if (!out_dir.empty()) {
      fedhar::ParamSet joint = pm.embed;
      for (const auto& [name, t] : pm.head) joint.insert(name, t);
      joint.save((fs::path(out_dir) / (v.user_id + ".fhps")).string());
    }
    emit({{"type", "personalize"},
          {"user", v.user_id},
          {"split", split},
          {"strategy", strategy},
          {"epochs", pcfg.epochs},
          {"stage1_skipped", pm.stage1_skipped},
          {"train_accuracy", train_acc},
          {"test_accuracy", test_acc}});
  };
  for (const auto& v : ctx.train_views) handle(v, "meta_train");
  for (const auto& v : ctx.test_views) handle(v, "meta_test");
  return 0;
}

int cmd_evaluate(const fedhar::ExperimentConfig& cfg, std::uint64_t seed,
                 const std::string& checkpoint, const std::string& personal_dir) {
  auto ctx = fedhar::build_context(cfg, seed);
  std::vector<std::pair<double, std::size_t>> train_entries, test_entries;

  auto handle = [&](const fedhar::LocalView& v, const std::string& split) {
    if (v.test_feat.empty()) return;
    double acc = 0.0;
    std::string model;
    if (!personal_dir.empty()) {
      fedhar::ParamSet joint =
          fedhar::ParamSet::load((fs::path(personal_dir) / (v.user_id + ".fhps")).string());
      fedhar::PersonalModel pm;
      pm.embed = joint.subset_with_prefix("embed.");
      pm.head = joint.subset_with_prefix("head.");
      acc = fedhar::personal_accuracy(*ctx.net, pm, v.test_feat, v.test_local);
      model = "personal";
    } else {
      fedhar::ParamSet central = fedhar::ParamSet::load(checkpoint);
      fedhar::require(central.has("head.fc.w"),
                      "evaluate: checkpoint has no global head; pass --personal-dir");
      fedhar::ClassifierHead head(ctx.net->hyper().embed_dim,
                                  central.at("head.fc.b").size());
      acc = fedhar::classification_accuracy(*ctx.net, head, central, v.test_feat,
                                            v.test_global);
      model = "global";
    }
    (split == "meta_train" ? train_entries : test_entries).emplace_back(acc,
                                                                        v.test_feat.size());
    emit({{"type", "user_eval"},
          {"user", v.user_id},
          {"split", split},
          {"model", model},
          {"n_test", v.test_feat.size()},
          {"accuracy", acc}});
  };
  for (const auto& v : ctx.train_views) handle(v, "meta_train");
  for (const auto& v : ctx.test_views) handle(v, "meta_test");

  json j{{"type", "evaluate_done"}};
  if (!train_entries.empty()) j["meta_train_acc"] = fedhar::weighted_accuracy(train_entries);
  if (!test_entries.empty()) j["meta_test_acc"] = fedhar::weighted_accuracy(test_entries);
  emit(j);
  return 0;
}

int cmd_demo(const fedhar::ExperimentConfig& cfg, std::uint64_t seed) {
  auto demo = fedhar::demo_heterogeneity(cfg, seed);
  if (!cfg.run_dir.empty()) fedhar::write_demo(cfg.run_dir, demo);
  json j{{"type", "demo_done"}, {"pca_points", demo.pca.size()}};
  for (const auto& [label, acc] : demo.final_accuracy) j[label + "_final_acc"] = acc;
  emit(j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated representation learning simulator for activity recognition"};
  app.require_subcommand(1);

  std::string config_path, input, format = "canonical", output, features_out;
  std::string checkpoint, personal_dir, out_dir, run_dir;
  std::vector<std::string> overrides;
  std::uint64_t seed = 1;
  int intervals = fedhar::kDefaultIntervals;

  auto add_config_opts = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file (JSON)");
    sub->add_option("--set", overrides, "override a config key, e.g. --set rounds=20")
        ->take_all();
  };

  auto* preprocess = app.add_subcommand("preprocess", "ingest a raw dataset, write canonical samples");
  preprocess->add_option("--input", input, "dataset path")->required();
  preprocess->add_option("--format", format, "hhar | uschad | canonical");
  preprocess->add_option("--output", output, "canonical output path")->required();
  preprocess->add_option("--features", features_out, "also write feature tensors (JSONL)");
  preprocess->add_option("--intervals", intervals, "time intervals per window");

  auto* partition = app.add_subcommand("partition", "build and dump a user partition manifest");
  add_config_opts(partition);
  partition->add_option("--seed", seed, "partition seed");
  partition->add_option("--output", output, "manifest path")->required();

  auto* train = app.add_subcommand("train", "run the configured experiment across seeds");
  add_config_opts(train);

  auto* personalize = app.add_subcommand("personalize", "personalize a trained embedding checkpoint");
  add_config_opts(personalize);
  personalize->add_option("--seed", seed, "experiment seed used for the checkpoint");
  personalize->add_option("--checkpoint", checkpoint, "central checkpoint (.fhps)")->required();
  personalize->add_option("--output-dir", out_dir, "directory for personal models");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint or personal models");
  add_config_opts(evaluate);
  evaluate->add_option("--seed", seed, "experiment seed used for the checkpoint");
  evaluate->add_option("--checkpoint", checkpoint, "central checkpoint (.fhps)");
  evaluate->add_option("--personal-dir", personal_dir, "directory of personal models");

  auto* demo = app.add_subcommand("demo-heterogeneity",
                                  "PCA scatter + central / per-user / shuffled training traces");
  add_config_opts(demo);
  demo->add_option("--seed", seed, "demo seed");

  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("--run-dir", run_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (preprocess->parsed()) return cmd_preprocess(input, format, output, features_out, intervals);
    if (partition->parsed()) return cmd_partition(load_config(config_path, overrides), seed, output);
    if (train->parsed()) return cmd_train(load_config(config_path, overrides));
    if (personalize->parsed())
      return cmd_personalize(load_config(config_path, overrides), seed, checkpoint, out_dir);
    if (evaluate->parsed()) {
      fedhar::require(!checkpoint.empty() || !personal_dir.empty(),
                      "evaluate: pass --checkpoint or --personal-dir");
      return cmd_evaluate(load_config(config_path, overrides), seed, checkpoint, personal_dir);
    }
    if (demo->parsed()) return cmd_demo(load_config(config_path, overrides), seed);
    if (report->parsed()) {
      std::cout << fedhar::summarize_run(run_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"type", "error"}, {"message", e.what()}}.dump() << std::endl;
    return 1;
  }
  return 0;
}
