#include "htrl/harness.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace htrl {
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("harness", "cannot write " + path.string());
  os << text;
  if (!os) throw Error("harness", "write failed: " + path.string());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("harness", "cannot write " + path.string());
  return os;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

TrainSchedule RunConfig::schedule() const {
  return TrainSchedule{base_timesteps, growth, n_triggers, total_timesteps};
}

void RunConfig::validate() const {
  if (circuit.empty()) throw Error("config", "no circuit given");
  if (!fs::exists(circuit)) throw Error("config", "circuit file not found: " + circuit);
  if (seeds.empty()) throw Error("config", "seed list is empty");
  if (n_triggers < 2) throw Error("config", "n_triggers must be at least 2");
  if (!(suspicious_fraction > 0.0 && suspicious_fraction <= 1.0)) {
    throw Error("config", "suspicious_fraction must be in (0, 1]");
  }
  if (schedule().total() == 0) throw Error("config", "training budget is zero");
  if (ppo.rollout_length == 0 || ppo.minibatch_size == 0 || ppo.epochs == 0) {
    throw Error("config", "rollout length, minibatch size and epochs must be positive");
  }
  if (output_dir.empty()) throw Error("config", "no output directory given");
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& is) {
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  for (std::size_t no = 1; std::getline(is, line); ++no) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("config", "line " + std::to_string(no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error("config", "line " + std::to_string(no) + ": empty key");
    std::replace(key.begin(), key.end(), '_', '-');
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

// ---------------------------------------------------------------------------

ReportSummary summarize(const std::string& circuit, std::uint32_t n_triggers,
                        const TrojanLog& log) {
  ReportSummary s;
  s.circuit = circuit;
  s.n_triggers = n_triggers;
  s.unique_trojans = log.size();
  std::vector<double> icps;
  for (const TrojanRecord& r : log.records()) {
    icps.push_back(r.icp);
    s.scatter.push_back({r.key(), r.icp});
    for (std::size_t i = 0; i < kIcpThresholds.size(); ++i) {
      // ICPs are ratios k/n; the slack absorbs rounding of values like 3/5.
      if (r.icp >= kIcpThresholds[i] - 1e-12) ++s.at_least[i];
    }
  }
  std::sort(icps.begin(), icps.end(), std::greater<>());
  const std::size_t top = std::min<std::size_t>(10, icps.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < top; ++i) sum += icps[i];
  s.top10_mean_icp = top ? sum / static_cast<double>(top) : 0.0;
  s.best_icp = icps.empty() ? 0.0 : icps.front();
  return s;
}

void write_report(std::ostream& os, const ReportSummary& s) {
  os << "circuit\t" << s.circuit << '\n';
  os << "n_triggers\t" << s.n_triggers << '\n';
  os << "unique_trojans\t" << s.unique_trojans << '\n';
  for (std::size_t i = 0; i < kIcpThresholds.size(); ++i) {
    char label[32];
    std::snprintf(label, sizeof label, "icp_ge_%.2f", kIcpThresholds[i]);
    os << label << '\t' << s.at_least[i] << '\n';
  }
  os << "top10_mean_icp\t" << fmt(s.top10_mean_icp) << '\n';
  os << "best_icp\t" << fmt(s.best_icp) << '\n';
}

void write_scatter(std::ostream& os, const ReportSummary& s) {
  os << "index,trojan,icp\n";
  for (std::size_t i = 0; i < s.scatter.size(); ++i) {
    os << i << ",\"" << s.scatter[i].key << "\"," << fmt(s.scatter[i].icp) << '\n';
  }
}

ExperimentResult run_experiment(const RunConfig& config, std::ostream* progress) {
  config.validate();
  const Circuit circuit = load_circuit(config.circuit);
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("harness", "cannot create " + dir.string() + ": " + ec.message());

  const std::string stem = circuit.name() + "_n" + std::to_string(config.n_triggers);
  const ScoapTable table = compute_scoap(circuit);
  const SuspiciousSet suspicious = select_suspicious(circuit, table, config.suspicious_fraction);

  ExperimentResult out;
  for (std::uint64_t seed : config.seeds) {
    EnvConfig ec_env;
    ec_env.n_triggers = config.n_triggers;
    ec_env.steps_per_episode = config.steps_per_episode;
    ec_env.suspicious_fraction = config.suspicious_fraction;
    ec_env.seed = seed;
    ec_env.podem_backtrack_limit = config.podem_backtrack_limit;
    TrojanEnv env(circuit, ec_env, suspicious);

    PpoConfig ppo = config.ppo;
    ppo.seed = seed;
    const std::string run = stem + "_seed" + std::to_string(seed);
    std::ofstream metrics = open_out(dir / (run + "_metrics.csv"));
    SeedRun sr;
    sr.seed = seed;
    sr.result = train(env, config.schedule(), ppo, &metrics);

    std::ofstream log_os = open_out(dir / (run + ".jsonl"));
    sr.result.log.write_jsonl(log_os);
    std::ofstream policy_os = open_out(dir / (run + "_policy.txt"));
    save_policy(policy_os, sr.result.params);

    for (const TrojanRecord& r : sr.result.log.records()) out.merged.add(r);
    if (progress) {
      *progress << run << ": " << sr.result.log.size() << " Trojans, best ICP "
                << fmt(sr.result.best_icp) << '\n';
    }
    out.runs.push_back(std::move(sr));
  }

  out.summary = summarize(circuit.name(), config.n_triggers, out.merged);
  std::ofstream merged = open_out(dir / (stem + "_trojans.jsonl"));
  out.merged.write_jsonl(merged);
  std::ofstream report = open_out(dir / (stem + "_report.txt"));
  write_report(report, out.summary);
  std::ofstream scatter = open_out(dir / (stem + "_scatter.csv"));
  write_scatter(scatter, out.summary);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> input_access_all(const Circuit& circuit) {
  const std::size_t n_pi = circuit.primary_inputs().size();
  const std::size_t words = (n_pi + 63) / 64;
  std::vector<std::uint64_t> support(circuit.net_count() * words, 0);
  // Net ids are topological, so a single forward pass suffices.
  for (const Net& net : circuit.nets()) {
    std::uint64_t* row = support.data() + net.id * words;
    if (net.is_primary_input()) {
      const std::size_t i = circuit.input_index(net.id);
      row[i / 64] |= std::uint64_t{1} << (i % 64);
      continue;
    }
    for (NetId in : circuit.gate(net.driver).inputs) {
      const std::uint64_t* src = support.data() + in * words;
      for (std::size_t w = 0; w < words; ++w) row[w] |= src[w];
    }
  }
  std::vector<double> out(circuit.net_count());
  for (NetId id = 0; id < circuit.net_count(); ++id) {
    std::size_t count = 0;
    for (std::size_t w = 0; w < words; ++w) count += std::popcount(support[id * words + w]);
    out[id] = static_cast<double>(count) / static_cast<double>(n_pi);
  }
  return out;
}

double input_access(const Circuit& circuit, NetId net) {
  if (net >= circuit.net_count()) throw Error("harness", "unknown net " + std::to_string(net));
  return input_access_all(circuit)[net];
}

double mean_input_access(const Circuit& circuit) {
  const std::vector<double> all = input_access_all(circuit);
  double sum = 0.0;
  for (double a : all) sum += a;
  return sum / static_cast<double>(all.size());
}

Insertion replay(const Circuit& base, const TrojanRecord& record) {
  std::vector<NetId> triggers;
  for (const std::string& t : record.triggers) {
    auto id = base.find(t);
    if (!id) throw Error("harness", "logged trigger '" + t + "' not in " + base.name());
    triggers.push_back(*id);
  }
  auto target = base.find(record.target);
  if (!target) throw Error("harness", "logged target '" + record.target + "' not in " + base.name());
  return insert(base, triggers, *target);
}

EmittedFiles emit_infected(const Circuit& infected, const TrojanInstance& instance,
                           const fs::path& dir, const std::string& stem,
                           std::uint64_t backtrack_limit) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("harness", "cannot create " + dir.string() + ": " + ec.message());

  EmittedFiles files;
  files.bench = dir / (stem + ".bench");
  files.verilog = dir / (stem + ".v");
  files.metadata = dir / (stem + ".json");
  files.activation = check_activation(infected, instance, compute_scoap(infected), backtrack_limit);
  files.icp = files.activation.detected() ? icp(files.activation, infected) : 0.0;

  write_file(files.bench, emit_bench(infected));
  write_file(files.verilog, emit_verilog(infected));

  nlohmann::ordered_json meta;
  meta["circuit"] = infected.name();
  std::vector<std::string> trig;
  for (NetId t : instance.triggers) trig.push_back(infected.net(t).name);
  meta["triggers"] = trig;
  meta["target"] = infected.net(instance.target).name;
  meta["trigger_net"] = infected.net(instance.trigger_output).name;
  meta["payload_net"] = infected.net(instance.payload_output).name;
  meta["status"] = std::string(to_string(files.activation.status));
  meta["icp"] = files.icp;
  nlohmann::ordered_json stack = nlohmann::ordered_json::object();
  for (NetId pi : infected.primary_inputs()) {
    auto it = files.activation.input_stack.find(pi);
    if (it != files.activation.input_stack.end()) stack[infected.net(pi).name] = it->second ? 1 : 0;
  }
  meta["input_stack"] = std::move(stack);
  write_file(files.metadata, meta.dump(2) + "\n");
  return files;
}

}  // namespace htrl
