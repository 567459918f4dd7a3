#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fedhar/harness.hpp"
#include "fedhar/report.hpp"

using namespace fedhar;
namespace fs = std::filesystem;

static ExperimentConfig tiny_config(const std::string& scheme) {
  ExperimentConfig cfg;
  cfg.dataset = "synthetic";
  cfg.synth_users = 4;
  cfg.synth_classes = 3;
  cfg.synth_per_class = 8;
  cfg.synth_style = 1.0;
  cfg.n_meta_test = 1;
  cfg.filters = 2;
  cfg.embed_dim = 4;
  cfg.dropout = 0.0;
  cfg.scheme = scheme;
  cfg.seeds = {1};
  cfg.rounds = 2;
  cfg.local_epochs = 1;
  cfg.batch_size = 16;
  cfg.finetune_epochs = 1;
  cfg.early_stop_patience = 0;
  return cfg;
}

TEST(WeightedAccuracy, KnownValueAndEdgeCases) {
  EXPECT_DOUBLE_EQ(weighted_accuracy({{1.0, 10}, {0.5, 30}}), 0.625);
  EXPECT_DOUBLE_EQ(weighted_accuracy({{0.2, 7}, {0.4, 7}}), 0.3000000000000000444089209850062616169452667236328125);
  EXPECT_NEAR(weighted_accuracy({{0.2, 7}, {0.4, 7}}), 0.3, 1e-12);  // equal weights = mean
  EXPECT_DOUBLE_EQ(weighted_accuracy({{0.73, 5}}), 0.73);
  EXPECT_THROW(weighted_accuracy({}), std::invalid_argument);
  EXPECT_THROW(weighted_accuracy({{1.5, 3}}), std::invalid_argument);
  EXPECT_THROW(weighted_accuracy({{0.5, 0}}), std::invalid_argument);
}

TEST(WeightedAccuracy, PseudoUserSplitInvariance) {
  // splitting a user into two pseudo-users with the same accuracy is exact
  // for exactly representable accuracies
  const double acc = 0.625;
  const double whole = weighted_accuracy({{acc, 40}, {0.25, 16}});
  const double split = weighted_accuracy({{acc, 10}, {acc, 30}, {0.25, 16}});
  EXPECT_DOUBLE_EQ(whole, split);
}

TEST(Config, JsonRoundTripAndUnknownKey) {
  ExperimentConfig cfg = tiny_config("meta_har");
  cfg.strategy = "merged";
  nlohmann::json j = cfg.to_json();
  ExperimentConfig back = ExperimentConfig::from_json(j);
  EXPECT_EQ(back.to_json(), j);
  j["not_a_key"] = 1;
  EXPECT_THROW(ExperimentConfig::from_json(j), std::invalid_argument);
}

TEST(Config, ValidationCatchesBadValues) {
  nlohmann::json j = tiny_config("meta_har").to_json();
  j["scheme"] = "nonsense";
  EXPECT_THROW(ExperimentConfig::from_json(j), std::invalid_argument);
  j = tiny_config("meta_har").to_json();
  j["seeds"] = std::vector<std::uint64_t>{};
  EXPECT_THROW(ExperimentConfig::from_json(j), std::invalid_argument);
  j = tiny_config("meta_har").to_json();
  j["lambda"] = 1.5;
  EXPECT_THROW(ExperimentConfig::from_json(j), std::invalid_argument);
}

TEST(RunExperiment, DeterministicReports) {
  ExperimentConfig cfg = tiny_config("meta_har");
  ExperimentReport a = run_experiment(cfg);
  ExperimentReport b = run_experiment(cfg);
  ASSERT_EQ(a.seeds.size(), b.seeds.size());
  EXPECT_EQ(a.seeds[0].meta_train_acc, b.seeds[0].meta_train_acc);
  EXPECT_EQ(a.seeds[0].meta_test_acc, b.seeds[0].meta_test_acc);
  ASSERT_EQ(a.seeds[0].rounds.size(), b.seeds[0].rounds.size());
  for (std::size_t r = 0; r < a.seeds[0].rounds.size(); ++r)
    EXPECT_EQ(a.seeds[0].rounds[r].train_loss, b.seeds[0].rounds[r].train_loss);
  for (std::size_t u = 0; u < a.seeds[0].users.size(); ++u)
    EXPECT_EQ(a.seeds[0].users[u].accuracy, b.seeds[0].users[u].accuracy);
}

TEST(RunExperiment, ParallelSeedsMatchSequential) {
  ExperimentConfig cfg = tiny_config("fedavg");
  cfg.seeds = {1, 2};
  ExperimentReport seq = run_experiment(cfg);
  cfg.parallel_seeds = true;
  ExperimentReport par = run_experiment(cfg);
  ASSERT_EQ(seq.seeds.size(), par.seeds.size());
  for (std::size_t i = 0; i < seq.seeds.size(); ++i) {
    EXPECT_EQ(seq.seeds[i].meta_train_acc, par.seeds[i].meta_train_acc);
    EXPECT_EQ(seq.seeds[i].meta_test_acc, par.seeds[i].meta_test_acc);
  }
}

TEST(RunExperiment, EverySchemeRunsEndToEnd) {
  for (const std::string scheme :
       {"central", "fedavg", "fedreptile", "meta_har", "meta_har_ce"}) {
    ExperimentConfig cfg = tiny_config(scheme);
    ExperimentReport report = run_experiment(cfg);
    ASSERT_EQ(report.seeds.size(), 1u) << scheme;
    EXPECT_FALSE(std::isnan(report.seeds[0].meta_train_acc)) << scheme;
    EXPECT_FALSE(std::isnan(report.seeds[0].meta_test_acc)) << scheme;
    EXPECT_FALSE(report.seeds[0].users.empty()) << scheme;
    EXPECT_GE(report.mean_meta_train, 0.0);
    EXPECT_LE(report.mean_meta_train, 1.0);
  }
}

TEST(RunExperiment, ReportMeansLieWithinPerSeedRange) {
  ExperimentConfig cfg = tiny_config("fedavg");
  cfg.seeds = {1, 2, 3};
  ExperimentReport report = run_experiment(cfg);
  double lo = 1.0, hi = 0.0;
  for (const auto& s : report.seeds) {
    lo = std::min(lo, s.meta_train_acc);
    hi = std::max(hi, s.meta_train_acc);
  }
  EXPECT_GE(report.mean_meta_train, lo - 1e-12);
  EXPECT_LE(report.mean_meta_train, hi + 1e-12);
}

TEST(RunExperiment, MetaHarNeverFederatesHeads) {
  // structural guarantee: pushed parameter sets under meta_har are embedding
  // only; run_rounds asserts this internally, so a full run passing is the
  // check
  ExperimentConfig cfg = tiny_config("meta_har");
  cfg.rounds = 3;
  EXPECT_NO_THROW(run_experiment(cfg));
}

TEST(RunExperiment, BalancedTestSubsampling) {
  ExperimentConfig cfg = tiny_config("fedavg");
  cfg.balanced_test = true;
  ExperimentReport report = run_experiment(cfg);
  EXPECT_FALSE(std::isnan(report.mean_meta_train));
}

TEST(RunExperiment, NonIidPartitionRuns) {
  ExperimentConfig cfg = tiny_config("meta_har");
  cfg.synth_classes = 4;
  cfg.non_iid = true;
  ExperimentReport report = run_experiment(cfg);
  EXPECT_FALSE(std::isnan(report.mean_meta_train));
}

TEST(ReportWriter, JsonlAndCsvAreWrittenAndSummarized) {
  ExperimentConfig cfg = tiny_config("fedavg");
  const std::string dir = (fs::temp_directory_path() / "fedhar_report_test").string();
  fs::remove_all(dir);
  ExperimentReport report = run_experiment(cfg);
  write_report(dir, report);
  EXPECT_TRUE(fs::exists(fs::path(dir) / "report.jsonl"));
  EXPECT_TRUE(fs::exists(fs::path(dir) / "rounds.csv"));
  EXPECT_TRUE(fs::exists(fs::path(dir) / "summary.csv"));

  std::ifstream f(fs::path(dir) / "report.jsonl");
  std::string line;
  bool has_config = false, has_round = false, has_user = false, has_summary = false;
  while (std::getline(f, line)) {
    const auto j = nlohmann::json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    has_config |= type == "config";
    has_round |= type == "round";
    has_user |= type == "user_eval";
    has_summary |= type == "summary";
  }
  EXPECT_TRUE(has_config && has_round && has_user && has_summary);

  const std::string summary = summarize_run(dir);
  EXPECT_NE(summary.find("fedavg"), std::string::npos);
  EXPECT_NE(summary.find("meta-train"), std::string::npos);
  fs::remove_all(dir);
}

TEST(ReportWriter, IdenticalRunsProduceIdenticalReportFiles) {
  ExperimentConfig cfg = tiny_config("meta_har");
  const std::string d1 = (fs::temp_directory_path() / "fedhar_det_a").string();
  const std::string d2 = (fs::temp_directory_path() / "fedhar_det_b").string();
  fs::remove_all(d1);
  fs::remove_all(d2);
  write_report(d1, run_experiment(cfg));
  write_report(d2, run_experiment(cfg));
  auto slurp = [](const std::string& p) {
    std::ifstream f(p);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  };
  EXPECT_EQ(slurp(d1 + "/report.jsonl"), slurp(d2 + "/report.jsonl"));
  EXPECT_EQ(slurp(d1 + "/rounds.csv"), slurp(d2 + "/rounds.csv"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(DemoHeterogeneity, EmitsPcaAndThreeTraces) {
  ExperimentConfig cfg = tiny_config("fedavg");
  cfg.rounds = 3;
  cfg.n_meta_test = 0;
  DemoResult demo = demo_heterogeneity(cfg, 7);
  EXPECT_EQ(demo.pca.size(),
            static_cast<std::size_t>(cfg.synth_users * cfg.synth_classes * cfg.synth_per_class));
  ASSERT_EQ(demo.traces.size(), 3u);
  for (const auto& [label, scale, records] : demo.traces) {
    EXPECT_EQ(records.size(), 3u) << label;  // trace record count = configured rounds
    EXPECT_TRUE(scale == "epoch" || scale == "round");
  }
  EXPECT_TRUE(demo.final_accuracy.count("central"));
  EXPECT_TRUE(demo.final_accuracy.count("fedavg_user"));
  EXPECT_TRUE(demo.final_accuracy.count("fedavg_shuffle"));
}

TEST(DemoHeterogeneity, CentralTraceCountsEpochsSeparately) {
  ExperimentConfig cfg = tiny_config("fedavg");
  cfg.rounds = 2;
  DemoResult demo = demo_heterogeneity(cfg, 8);
  for (const auto& [label, scale, records] : demo.traces) {
    if (label == "central") EXPECT_EQ(scale, "epoch");
    else EXPECT_EQ(scale, "round");
  }
}
