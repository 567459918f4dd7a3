#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedhar/harness.hpp"

namespace fedhar {

// Reports are line-delimited JSON records appended to <run_dir>/report.jsonl,
// plus plot-ready CSV files. Nothing here writes timestamps, so identical
// runs produce byte-identical reports.

inline void append_line(std::ofstream& f, const nlohmann::json& j) { f << j.dump() << "\n"; }

inline void write_report(const std::string& run_dir, const ExperimentReport& report) {
  namespace fs = std::filesystem;
  fs::create_directories(run_dir);
  std::ofstream jl(fs::path(run_dir) / "report.jsonl", std::ios::app);
  require(jl.is_open(), "write_report: cannot open report.jsonl");

  append_line(jl, {{"type", "config"}, {"config", report.config_echo}});

  std::set<std::string> metric_names;
  for (const auto& s : report.seeds)
    for (const auto& r : s.rounds)
      for (const auto& [name, _] : r.metrics) metric_names.insert(name);

  for (const auto& s : report.seeds) {
    for (const auto& r : s.rounds) {
      nlohmann::json j{{"type", "round"},
                       {"seed", s.seed},
                       {"round", r.round},
                       {"train_loss", r.train_loss}};
      for (const auto& [name, value] : r.metrics) j[name] = value;
      append_line(jl, j);
    }
    for (const auto& u : s.users) {
      append_line(jl, {{"type", "user_eval"},
                       {"seed", s.seed},
                       {"user", u.user},
                       {"split", u.split},
                       {"model", u.model},
                       {"n_test", u.n_test},
                       {"accuracy", u.accuracy}});
    }
    nlohmann::json j{{"type", "seed_summary"}, {"seed", s.seed}};
    if (!std::isnan(s.meta_train_acc)) j["meta_train_acc"] = s.meta_train_acc;
    if (!std::isnan(s.meta_test_acc)) j["meta_test_acc"] = s.meta_test_acc;
    append_line(jl, j);
  }

  nlohmann::json summary{{"type", "summary"}};
  if (!std::isnan(report.mean_meta_train)) {
    summary["meta_train_mean"] = report.mean_meta_train;
    summary["meta_train_std"] = report.std_meta_train;
  }
  if (!std::isnan(report.mean_meta_test)) {
    summary["meta_test_mean"] = report.mean_meta_test;
    summary["meta_test_std"] = report.std_meta_test;
  }
  append_line(jl, summary);
  require(jl.good(), "write_report: write failed");

  // plot-ready CSVs
  std::ofstream rounds_csv(fs::path(run_dir) / "rounds.csv", std::ios::app);
  rounds_csv << "seed,round,train_loss";
  for (const auto& name : metric_names) rounds_csv << "," << name;
  rounds_csv << "\n";
  for (const auto& s : report.seeds) {
    for (const auto& r : s.rounds) {
      rounds_csv << s.seed << "," << r.round << "," << r.train_loss;
      for (const auto& name : metric_names) {
        rounds_csv << ",";
        for (const auto& [n, v] : r.metrics)
          if (n == name) rounds_csv << v;
      }
      rounds_csv << "\n";
    }
  }

  std::ofstream summary_csv(fs::path(run_dir) / "summary.csv", std::ios::app);
  summary_csv << "split,mean,std\n";
  if (!std::isnan(report.mean_meta_train))
    summary_csv << "meta_train," << report.mean_meta_train << "," << report.std_meta_train
                << "\n";
  if (!std::isnan(report.mean_meta_test))
    summary_csv << "meta_test," << report.mean_meta_test << "," << report.std_meta_test << "\n";
}

inline void write_demo(const std::string& run_dir, const DemoResult& demo) {
  namespace fs = std::filesystem;
  fs::create_directories(run_dir);

  std::ofstream pca_csv(fs::path(run_dir) / "pca.csv", std::ios::app);
  pca_csv << "user,activity,pc1,pc2\n";
  for (const auto& row : demo.pca)
    pca_csv << row.user << "," << row.activity << "," << row.x << "," << row.y << "\n";

  std::ofstream traces_csv(fs::path(run_dir) / "traces.csv", std::ios::app);
  traces_csv << "scheme,scale,step,train_loss,accuracy\n";
  for (const auto& [label, scale, records] : demo.traces) {
    for (const auto& r : records) {
      traces_csv << label << "," << scale << "," << r.round << "," << r.train_loss << ",";
      if (!r.metrics.empty()) traces_csv << r.metrics.front().second;
      traces_csv << "\n";
    }
  }

  std::ofstream jl(fs::path(run_dir) / "report.jsonl", std::ios::app);
  for (const auto& [label, acc] : demo.final_accuracy)
    append_line(jl, {{"type", "demo_final"}, {"scheme", label}, {"accuracy", acc}});
}

// Aggregates the report stream of a run directory into a printable summary.
inline std::string summarize_run(const std::string& run_dir) {
  namespace fs = std::filesystem;
  std::ifstream f(fs::path(run_dir) / "report.jsonl");
  require(f.is_open(), "summarize_run: no report.jsonl in " + run_dir);
  std::string line;
  std::string scheme = "?";
  std::vector<double> train_acc, test_acc;
  std::vector<nlohmann::json> summaries, demo_finals;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const std::string type = j.value("type", "");
    if (type == "config") scheme = j.at("config").value("scheme", "?");
    if (type == "seed_summary") {
      if (j.contains("meta_train_acc")) train_acc.push_back(j["meta_train_acc"].get<double>());
      if (j.contains("meta_test_acc")) test_acc.push_back(j["meta_test_acc"].get<double>());
    }
    if (type == "summary") summaries.push_back(j);
    if (type == "demo_final") demo_finals.push_back(j);
  }
  std::ostringstream out;
  out << "run: " << run_dir << "\nscheme: " << scheme << "\n";
  auto line_for = [&](const std::string& name, const std::vector<double>& xs) {
    if (xs.empty()) return;
    auto [m, s] = mean_std(xs);
    out << name << ": " << m * 100.0 << " +/- " << s * 100.0 << " (" << xs.size()
        << " seeds)\n";
  };
  line_for("meta-train accuracy %", train_acc);
  line_for("meta-test accuracy %", test_acc);
  for (const auto& j : demo_finals)
    out << "demo " << j.at("scheme").get<std::string>() << ": "
        << j.at("accuracy").get<double>() * 100.0 << "%\n";
  return out.str();
}

}  // namespace fedhar
