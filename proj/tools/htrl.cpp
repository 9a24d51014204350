// htrl: command-line driver.
//
//   htrl parse  NETLIST                      validate and print statistics
//   htrl scoap  NETLIST                      SCOAP table with suspicious flags
//   htrl atpg   NETLIST --net N --stuck V    single stuck-at fault
//   htrl train  --circuit NETLIST ...        train agents, write logs and report
//   htrl report LOG...                       summarize Trojan logs
//   htrl emit   NETLIST --log LOG            write infected netlists

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "htrl/harness.hpp"

namespace {

using namespace htrl;

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os || !(os << text)) throw Error("io", "cannot write " + path);
}

Circuit load(const std::string& path, const char* stage = "parse") {
  try {
    return load_circuit(path);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(stage, e.what());
  }
}

int cmd_parse(const std::string& path, const std::string& bench_out,
              const std::string& verilog_out) {
  const Circuit c = load(path);
  std::map<std::string, std::size_t> kinds;
  for (const Gate& g : c.gates()) ++kinds[std::string(to_string(g.kind))];
  std::cout << "circuit\t" << c.name() << '\n'
            << "inputs\t" << c.primary_inputs().size() << '\n'
            << "outputs\t" << c.primary_outputs().size() << '\n'
            << "gates\t" << c.gate_count() << '\n'
            << "nets\t" << c.net_count() << '\n'
            << "max_level\t" << c.max_level() << '\n';
  for (const auto& [k, n] : kinds) std::cout << "gate_" << k << '\t' << n << '\n';
  if (!bench_out.empty()) write_text(bench_out, emit_bench(c));
  if (!verilog_out.empty()) write_text(verilog_out, emit_verilog(c));
  return 0;
}

int cmd_scoap(const std::string& path, double fraction, const std::string& out) {
  const Circuit c = load(path);
  const ScoapTable t = compute_scoap(c);
  const SuspiciousSet s = select_suspicious(c, t, fraction);
  write_text(out, format_scoap_table(c, t, s));
  std::cerr << s.nets.size() << " suspicious nets, t_hts=" << s.t_hts << " t_ocr=" << s.t_ocr
            << '\n';
  return 0;
}

int cmd_atpg(const std::string& path, const std::string& net, int stuck, std::uint64_t limit) {
  const Circuit c = load(path);
  auto id = c.find(net);
  if (!id) throw Error("atpg", "no net named '" + net + "' in " + c.name());
  const TestResult r = podem(c, Fault{*id, stuck != 0}, limit);
  std::cout << "status\t" << to_string(r.status) << '\n'
            << "backtracks\t" << r.backtracks << '\n';
  if (r.detected()) {
    std::cout << "assigned\t" << r.input_stack.size() << '/' << c.primary_inputs().size() << '\n';
    for (NetId pi : c.primary_inputs()) {
      auto it = r.input_stack.find(pi);
      if (it != r.input_stack.end()) std::cout << c.net(pi).name << '\t' << it->second << '\n';
    }
  }
  return r.status == TestStatus::Aborted ? 2 : 0;
}

int cmd_train(const RunConfig& config, bool quiet) {
  const ExperimentResult res = run_experiment(config, quiet ? nullptr : &std::cerr);
  write_report(std::cout, res.summary);
  return 0;
}

TrojanLog read_log(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("report", "cannot read " + path);
  return TrojanLog::read_jsonl(is);
}

int cmd_report(const std::vector<std::string>& logs, const std::string& scatter_out) {
  TrojanLog merged;
  for (const std::string& path : logs) {
    const TrojanLog log = read_log(path);
    for (const TrojanRecord& r : log.records()) merged.add(r);
  }
  std::string circuit;
  std::uint32_t n = 0;
  if (merged.size()) {
    circuit = merged.records().front().circuit;
    n = static_cast<std::uint32_t>(merged.records().front().triggers.size());
  }
  for (const TrojanRecord& r : merged.records()) {
    if (r.circuit != circuit || r.triggers.size() != n) {
      throw Error("report", "logs mix circuits or trigger counts; report them separately");
    }
  }
  const ReportSummary s = summarize(circuit, n, merged);
  write_report(std::cout, s);
  if (!scatter_out.empty()) {
    std::ostringstream os;
    write_scatter(os, s);
    write_text(scatter_out, os.str());
  }
  return 0;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_emit(const std::string& path, const std::string& log_path, std::size_t top,
             const std::string& triggers, const std::string& target, const std::string& out_dir,
             std::uint64_t limit) {
  const Circuit base = load(path);
  std::vector<TrojanRecord> chosen;
  if (!log_path.empty()) {
    std::vector<TrojanRecord> records = read_log(log_path).records();
    std::stable_sort(records.begin(), records.end(),
                     [](const auto& a, const auto& b) { return a.icp > b.icp; });
    if (records.empty()) throw Error("emit", "log " + log_path + " has no Trojans");
    if (records.size() > top) records.resize(top);
    chosen = std::move(records);
  } else {
    if (triggers.empty() || target.empty()) {
      throw Error("emit", "give either --log or both --triggers and --target");
    }
    TrojanRecord r;
    r.circuit = base.name();
    r.triggers = split_names(triggers);
    r.target = target;
    chosen.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const Insertion ins = replay(base, chosen[i]);
    const std::string stem = base.name() + "_ht" + std::to_string(i);
    const EmittedFiles f = emit_infected(ins.circuit, ins.instance, out_dir, stem, limit);
    std::cout << stem << '\t' << to_string(f.activation.status) << "\ticp=" << f.icp << '\n';
  }
  return 0;
}

// Fills options not given on the command line from a key=value file.
void apply_config_file(CLI::App& cmd, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("config", "cannot read " + path);
  for (const auto& [key, value] : parse_key_values(is)) {
    CLI::Option* opt = cmd.get_option_no_throw("--" + key);
    if (!opt || key == "config") throw Error("config", path + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    std::vector<std::string> items;
    if (opt->get_items_expected_max() > 1) {
      std::string v = value;
      std::replace(v.begin(), v.end(), ',', ' ');
      std::istringstream ss(v);
      for (std::string item; ss >> item;) items.push_back(item);
    } else {
      items.push_back(value);
    }
    try {
      opt->add_result(items);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw Error("config", path + ": " + key + ": " + e.what());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement-learning hardware Trojan insertion for gate-level netlists"};
  app.require_subcommand(1);

  std::string netlist, out, bench_out, verilog_out;
  double fraction = 0.05;

  auto* parse = app.add_subcommand("parse", "Validate a netlist and print statistics");
  parse->add_option("netlist", netlist, "Netlist (.bench or Yosys .json)")->required();
  parse->add_option("--bench", bench_out, "Write the netlist as bench");
  parse->add_option("--verilog", verilog_out, "Write the netlist as structural Verilog");

  auto* scoap = app.add_subcommand("scoap", "Print the SCOAP table");
  scoap->add_option("netlist", netlist, "Netlist")->required();
  scoap->add_option("--fraction", fraction, "Suspicious fraction of nets")
      ->check(CLI::Range(0.0, 1.0));
  scoap->add_option("-o,--output", out, "Output file (default stdout)");

  std::string net;
  int stuck = 0;
  std::uint64_t limit = kDefaultBacktrackLimit;
  auto* atpg = app.add_subcommand("atpg", "Run PODEM for one stuck-at fault");
  atpg->add_option("netlist", netlist, "Netlist")->required();
  atpg->add_option("--net", net, "Faulty net name")->required();
  atpg->add_option("--stuck", stuck, "Stuck-at value")->required()->check(CLI::Range(0, 1));
  atpg->add_option("--backtrack-limit", limit, "Backtrack budget");

  RunConfig rc;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train agents and write Trojan logs and a report");
  std::string config_path;
  train->add_option("--config", config_path, "key=value file; command-line flags take precedence")
      ->check(CLI::ExistingFile);
  // Required, but possibly through the config file; RunConfig::validate checks.
  train->add_option("--circuit", rc.circuit, "Netlist");
  train->add_option("--n-triggers", rc.n_triggers, "Trigger inputs per Trojan")
      ->check(CLI::Range(2, 64));
  train->add_option("--suspicious-fraction", rc.suspicious_fraction, "Fraction of suspicious nets");
  train->add_option("--base-timesteps", rc.base_timesteps, "Budget for two triggers");
  train->add_option("--growth", rc.growth, "Budget growth per extra trigger");
  train->add_option("--total-timesteps", rc.total_timesteps, "Override the budget");
  train->add_option("--steps-per-episode", rc.steps_per_episode, "Override the episode length");
  train->add_option("--seeds", rc.seeds, "Seeds, one agent each")->expected(1, -1);
  train->add_option("--output-dir", rc.output_dir, "Directory for logs and reports");
  train->add_option("--backtrack-limit", rc.podem_backtrack_limit, "PODEM backtrack budget");
  train->add_option("--hidden", rc.ppo.hidden, "Hidden layer widths")->expected(0, -1);
  train->add_option("--learning-rate", rc.ppo.learning_rate, "Adam step size");
  train->add_option("--clip", rc.ppo.clip_epsilon, "PPO clip range");
  train->add_option("--gamma", rc.ppo.gamma, "Discount");
  train->add_option("--gae-lambda", rc.ppo.gae_lambda, "GAE lambda");
  train->add_option("--rollout", rc.ppo.rollout_length, "Steps per rollout");
  train->add_option("--epochs", rc.ppo.epochs, "Epochs per update");
  train->add_option("--minibatch", rc.ppo.minibatch_size, "Minibatch size");
  train->add_option("--ent-coef", rc.ppo.entropy_coef, "Entropy bonus coefficient");
  train->add_option("--vf-coef", rc.ppo.value_coef, "Value loss coefficient");
  train->add_option("--max-grad-norm", rc.ppo.max_grad_norm, "Gradient norm clip (<=0 off)");
  train->add_flag("-q,--quiet", quiet, "No progress output");

  std::vector<std::string> logs;
  std::string scatter_out;
  auto* report = app.add_subcommand("report", "Summarize Trojan logs");
  report->add_option("logs", logs, "JSONL Trojan logs")->required()->check(CLI::ExistingFile);
  report->add_option("--scatter", scatter_out, "Write the (Trojan, ICP) scatter as CSV");

  std::string log_path, triggers, target, out_dir = ".";
  std::size_t top = 1;
  auto* emit = app.add_subcommand("emit", "Write infected netlists (.bench, .v, .json)");
  emit->add_option("netlist", netlist, "Original netlist")->required();
  emit->add_option("--log", log_path, "Trojan log; emits the highest-ICP entries")
      ->check(CLI::ExistingFile);
  emit->add_option("--top", top, "Number of log entries to emit");
  emit->add_option("--triggers", triggers, "Comma-separated trigger nets");
  emit->add_option("--target", target, "Target net");
  emit->add_option("-o,--output-dir", out_dir, "Output directory");
  emit->add_option("--backtrack-limit", limit, "PODEM backtrack budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train && !config_path.empty()) apply_config_file(*train, config_path);
    if (*parse) return cmd_parse(netlist, bench_out, verilog_out);
    if (*scoap) return cmd_scoap(netlist, fraction, out);
    if (*atpg) return cmd_atpg(netlist, net, stuck, limit);
    if (*train) return cmd_train(rc, quiet);
    if (*report) return cmd_report(logs, scatter_out);
    if (*emit) return cmd_emit(netlist, log_path, top, triggers, target, out_dir, limit);
  } catch (const Error& e) {
    std::cerr << "htrl: " << e.stage() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "htrl: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
