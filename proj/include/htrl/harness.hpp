#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "htrl/circuit.hpp"
#include "htrl/ppo.hpp"
#include "htrl/trojan.hpp"

namespace htrl {

struct RunConfig {
  std::string circuit;  // .bench or .json netlist
  std::uint32_t n_triggers = 2;
  double suspicious_fraction = 0.05;
  std::uint64_t base_timesteps = 120000;
  double growth = 0.10;
  std::uint64_t total_timesteps = 0;  // nonzero overrides the schedule
  std::uint32_t steps_per_episode = 0;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs";
  std::uint64_t podem_backtrack_limit = kDefaultBacktrackLimit;
  PpoConfig ppo;

  TrainSchedule schedule() const;
  // Throws Error("config") on a missing circuit, empty seed list or bad value.
  void validate() const;
};

// Plain "key = value" lines; '#' starts a comment. Keys are returned with
// '_' replaced by '-'. Throws Error("config") on malformed lines.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& is);

inline constexpr std::array<double, 3> kIcpThresholds{0.60, 0.65, 0.70};

struct ScatterPoint {
  std::string key;  // TrojanRecord::key()
  double icp = 0.0;
};

struct ReportSummary {
  std::string circuit;
  std::uint32_t n_triggers = 0;
  std::size_t unique_trojans = 0;
  std::array<std::size_t, kIcpThresholds.size()> at_least{};  // per threshold
  double top10_mean_icp = 0.0;
  double best_icp = 0.0;
  std::vector<ScatterPoint> scatter;  // discovery order
};

ReportSummary summarize(const std::string& circuit, std::uint32_t n_triggers,
                        const TrojanLog& log);
void write_report(std::ostream& os, const ReportSummary& summary);
void write_scatter(std::ostream& os, const ReportSummary& summary);

struct SeedRun {
  std::uint64_t seed = 0;
  TrainResult result;
};

struct ExperimentResult {
  std::vector<SeedRun> runs;
  TrojanLog merged;  // seed order, deduplicated
  ReportSummary summary;
};

// Trains one agent per seed and writes, under output_dir:
//   <stem>_seed<k>.jsonl, <stem>_seed<k>_metrics.csv, <stem>_seed<k>_policy.txt,
//   <stem>_trojans.jsonl, <stem>_report.txt, <stem>_scatter.csv
// where <stem> is "<circuit>_n<n_triggers>".
ExperimentResult run_experiment(const RunConfig& config, std::ostream* progress = nullptr);

// Fraction of primary inputs with a directed path to `net` (a primary input
// reaches itself).
double input_access(const Circuit& circuit, NetId net);
std::vector<double> input_access_all(const Circuit& circuit);
double mean_input_access(const Circuit& circuit);

// Rebuilds the infected circuit of a logged Trojan by net names.
Insertion replay(const Circuit& base, const TrojanRecord& record);

struct EmittedFiles {
  std::filesystem::path bench, verilog, metadata;
  TestResult activation;
  double icp = 0.0;
};

// Writes <stem>.bench, <stem>.v and <stem>.json (triggers, target, icp,
// input_stack) for an infected circuit. Activation is recomputed here.
EmittedFiles emit_infected(const Circuit& infected, const TrojanInstance& instance,
                           const std::filesystem::path& dir, const std::string& stem,
                           std::uint64_t backtrack_limit = kDefaultBacktrackLimit);

}  // namespace htrl
