#include "htrl/trojan.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace htrl {
namespace {

std::string fresh_name(const Circuit& circuit, const std::string& base) {
  std::string name = base;
  for (int k = 1; circuit.find(name); ++k) name = base + "_" + std::to_string(k);
  return name;
}

}  // namespace

std::string_view to_string(PlacementRule rule) {
  switch (rule) {
    case PlacementRule::TriggerCount: return "trigger count";
    case PlacementRule::IndependentTriggers: return "rule 2 (independent triggers)";
    case PlacementRule::TargetIsTrigger: return "rule 3 (target is a trigger)";
    case PlacementRule::TargetLevel: return "rule 4 (target level)";
    case PlacementRule::LoopPrevention: return "loop prevention";
  }
  return "?";
}

std::optional<RuleViolation> check_placement(const Circuit& circuit, const ConeIndex& cones,
                                             std::span<const NetId> triggers, NetId target,
                                             InsertOptions options) {
  const std::size_t n = circuit.net_count();
  if (triggers.size() < 2) {
    return RuleViolation(PlacementRule::TriggerCount, "need at least two trigger nets");
  }
  if (target >= n || std::any_of(triggers.begin(), triggers.end(), [&](NetId t) { return t >= n; })) {
    throw Error("trojan", "placement references an unknown net");
  }
  for (std::size_t i = 0; i < triggers.size(); ++i) {
    for (std::size_t j = i + 1; j < triggers.size(); ++j) {
      if (triggers[i] == triggers[j]) {
        return RuleViolation(PlacementRule::IndependentTriggers,
                             "trigger '" + circuit.net(triggers[i]).name + "' used twice");
      }
      if (options.require_independent_triggers && cones.related(triggers[i], triggers[j])) {
        return RuleViolation(PlacementRule::IndependentTriggers,
                             "'" + circuit.net(triggers[i]).name + "' and '" +
                                 circuit.net(triggers[j]).name + "' share a fanin/fanout path");
      }
    }
  }
  for (NetId t : triggers) {
    if (t == target) {
      return RuleViolation(PlacementRule::TargetIsTrigger,
                           "'" + circuit.net(t).name + "' is both trigger and target");
    }
  }
  for (NetId t : triggers) {
    if (circuit.net(target).level <= circuit.net(t).level) {
      return RuleViolation(PlacementRule::TargetLevel,
                           "target '" + circuit.net(target).name + "' (level " +
                               std::to_string(circuit.net(target).level) + ") not above trigger '" +
                               circuit.net(t).name + "' (level " +
                               std::to_string(circuit.net(t).level) + ")");
    }
  }
  for (NetId t : triggers) {
    if (cones.reaches(t, target)) {
      return RuleViolation(PlacementRule::LoopPrevention,
                           "target '" + circuit.net(target).name + "' is in the fanout of '" +
                               circuit.net(t).name + "'");
    }
  }
  return std::nullopt;
}

Insertion insert(const Circuit& circuit, std::span<const NetId> triggers, NetId target,
                 InsertOptions options) {
  return insert(circuit, ConeIndex(circuit), triggers, target, options);
}

Insertion insert(const Circuit& circuit, const ConeIndex& cones, std::span<const NetId> triggers,
                 NetId target, InsertOptions options) {
  if (auto violation = check_placement(circuit, cones, triggers, target, options)) {
    throw *violation;
  }
  const std::string& target_name = circuit.net(target).name;
  const std::string and_name = fresh_name(circuit, "ht_trigger");
  const std::string xor_name = fresh_name(circuit, "ht_payload");

  CircuitBuilder b(circuit.name());
  for (NetId id : circuit.primary_inputs()) b.add_input(circuit.net(id).name);
  for (NetId id : circuit.primary_outputs()) {
    b.add_output(id == target ? xor_name : circuit.net(id).name);
  }
  for (const Gate& g : circuit.gates()) {
    std::vector<std::string> ins;
    ins.reserve(g.inputs.size());
    for (NetId in : g.inputs) ins.push_back(in == target ? xor_name : circuit.net(in).name);
    b.add_gate(g.kind, circuit.net(g.output).name, std::move(ins));
  }
  std::vector<std::string> trig_names;
  for (NetId t : triggers) trig_names.push_back(circuit.net(t).name);
  b.add_gate(GateKind::And, and_name, trig_names);
  b.add_gate(GateKind::Xor, xor_name, {target_name, and_name});

  Insertion out{b.build(), {}};
  const Circuit& c = out.circuit;
  TrojanInstance& inst = out.instance;
  for (const std::string& name : trig_names) inst.triggers.push_back(c.at(name));
  inst.target = c.at(target_name);
  inst.trigger_output = c.at(and_name);
  inst.payload_output = c.at(xor_name);
  inst.and_gate = c.net(inst.trigger_output).driver;
  inst.xor_gate = c.net(inst.payload_output).driver;
  return out;
}

Circuit remove(const Circuit& circuit, const TrojanInstance& inst) {
  auto stale = [](const std::string& why) { throw StaleInstance("stale Trojan instance: " + why); };
  if (inst.and_gate >= circuit.gate_count() || inst.xor_gate >= circuit.gate_count() ||
      inst.trigger_output >= circuit.net_count() || inst.payload_output >= circuit.net_count() ||
      inst.target >= circuit.net_count()) {
    stale("ids out of range");
  }
  const Gate& ag = circuit.gate(inst.and_gate);
  const Gate& xg = circuit.gate(inst.xor_gate);
  if (ag.kind != GateKind::And || ag.output != inst.trigger_output || ag.inputs != inst.triggers) {
    stale("trigger gate does not match");
  }
  const std::vector<NetId> xor_inputs{inst.target, inst.trigger_output};
  if (xg.kind != GateKind::Xor || xg.output != inst.payload_output || xg.inputs != xor_inputs) {
    stale("payload gate does not match");
  }
  const Net& trig = circuit.net(inst.trigger_output);
  if (trig.fanout.size() != 1 || circuit.is_primary_output(trig.id)) {
    stale("trigger output is used outside the payload");
  }
  if (circuit.net(inst.target).fanout.size() != 1) stale("target still drives other gates");

  const std::string& target_name = circuit.net(inst.target).name;
  CircuitBuilder b(circuit.name());
  for (NetId id : circuit.primary_inputs()) b.add_input(circuit.net(id).name);
  for (NetId id : circuit.primary_outputs()) {
    b.add_output(id == inst.payload_output ? target_name : circuit.net(id).name);
  }
  for (const Gate& g : circuit.gates()) {
    if (g.id == inst.and_gate || g.id == inst.xor_gate) continue;
    std::vector<std::string> ins;
    ins.reserve(g.inputs.size());
    for (NetId in : g.inputs) {
      ins.push_back(in == inst.payload_output ? target_name : circuit.net(in).name);
    }
    b.add_gate(g.kind, circuit.net(g.output).name, std::move(ins));
  }
  return b.build();
}

Placement sample_placement(const Circuit& circuit, const ConeIndex& cones,
                           std::uint32_t n_triggers, std::mt19937_64& rng) {
  if (n_triggers < 2) throw Error("trojan", "need at least two trigger nets");
  const std::size_t n = circuit.net_count();
  std::uniform_int_distribution<std::size_t> any_net(0, n - 1);
  std::vector<NetId> candidates;
  for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
    Placement p;
    for (int draw = 0; draw < 100 && p.triggers.size() < n_triggers; ++draw) {
      const auto t = static_cast<NetId>(any_net(rng));
      const bool clash = std::any_of(p.triggers.begin(), p.triggers.end(), [&](NetId u) {
        return u == t || cones.related(u, t);
      });
      if (!clash) p.triggers.push_back(t);
    }
    if (p.triggers.size() < n_triggers) continue;

    std::uint32_t top = 0;
    for (NetId t : p.triggers) top = std::max(top, circuit.net(t).level);
    candidates.clear();
    for (std::uint32_t lv = top + 1; lv <= circuit.max_level(); ++lv) {
      for (NetId c : circuit.nets_at_level(lv)) {
        if (std::none_of(p.triggers.begin(), p.triggers.end(),
                         [&](NetId t) { return cones.reaches(t, c); })) {
          candidates.push_back(c);
        }
      }
    }
    if (candidates.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    p.target = candidates[pick(rng)];
    return p;
  }
  throw Error("trojan", "no feasible Trojan placement after " +
                            std::to_string(kMaxPlacementAttempts) + " attempts");
}

Insertion random_insert(const Circuit& circuit, const TrojanConfig& config, std::mt19937_64& rng) {
  const ConeIndex cones(circuit);
  const Placement p = sample_placement(circuit, cones, config.n_triggers, rng);
  return insert(circuit, cones, p.triggers, p.target);
}

TestResult check_activation(const Circuit& infected, const TrojanInstance& instance,
                            const ScoapTable& table, std::uint64_t backtrack_limit) {
  return podem(infected, table, Fault{instance.trigger_output, false}, backtrack_limit);
}

double icp(const TestResult& result, const Circuit& circuit) {
  if (!result.detected()) throw Error("trojan", "ICP is undefined for an undetected Trojan");
  return static_cast<double>(result.input_stack.size()) /
         static_cast<double>(circuit.primary_inputs().size());
}

// ---------------------------------------------------------------------------

std::string TrojanRecord::key() const {
  std::vector<std::string> sorted = triggers;
  std::sort(sorted.begin(), sorted.end());
  std::string k;
  for (const auto& t : sorted) k += t + ",";
  return k + "->" + target;
}

std::string TrojanRecord::to_json_line() const {
  nlohmann::ordered_json j;
  j["circuit"] = circuit;
  j["triggers"] = triggers;
  j["target"] = target;
  j["icp"] = icp;
  nlohmann::ordered_json stack = nlohmann::ordered_json::object();
  for (const auto& [name, v] : input_stack) stack[name] = v ? 1 : 0;
  j["input_stack"] = std::move(stack);
  j["episode"] = episode;
  j["step"] = step;
  j["seed"] = seed;
  return j.dump();
}

TrojanRecord TrojanRecord::from_json_line(const std::string& line) {
  TrojanRecord r;
  try {
    const auto j = nlohmann::ordered_json::parse(line);
    r.circuit = j.at("circuit").get<std::string>();
    r.triggers = j.at("triggers").get<std::vector<std::string>>();
    r.target = j.at("target").get<std::string>();
    r.icp = j.at("icp").get<double>();
    for (const auto& [name, v] : j.at("input_stack").items()) {
      r.input_stack.emplace_back(name, v.get<int>() != 0);
    }
    r.episode = j.at("episode").get<std::uint64_t>();
    r.step = j.at("step").get<std::uint64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("harness", std::string("bad Trojan log record: ") + e.what());
  }
  return r;
}

bool TrojanLog::add(TrojanRecord record) {
  if (!keys_.insert(record.key()).second) return false;
  records_.push_back(std::move(record));
  return true;
}

void TrojanLog::write_jsonl(std::ostream& os) const {
  for (const auto& r : records_) os << r.to_json_line() << '\n';
}

TrojanLog TrojanLog::read_jsonl(std::istream& is) {
  TrojanLog log;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) log.add(TrojanRecord::from_json_line(line));
  }
  return log;
}

}  // namespace htrl
