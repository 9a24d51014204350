#include "htrl/circuit.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include "htrl/error.hpp"

namespace htrl {

std::string_view to_string(GateKind kind) {
  switch (kind) {
    case GateKind::And: return "AND";
    case GateKind::Nand: return "NAND";
    case GateKind::Or: return "OR";
    case GateKind::Nor: return "NOR";
    case GateKind::Xor: return "XOR";
    case GateKind::Xnor: return "XNOR";
    case GateKind::Not: return "NOT";
    case GateKind::Buf: return "BUFF";
  }
  return "?";
}

std::optional<GateKind> parse_gate_kind(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "BUF") return GateKind::Buf;
  for (GateKind kind : kAllGateKinds) {
    if (upper == to_string(kind)) return kind;
  }
  return std::nullopt;
}

bool is_inverting(GateKind kind) {
  return kind == GateKind::Nand || kind == GateKind::Nor || kind == GateKind::Xnor ||
         kind == GateKind::Not;
}

bool valid_arity(GateKind kind, std::size_t inputs) {
  switch (kind) {
    case GateKind::Not:
    case GateKind::Buf: return inputs == 1;
    case GateKind::Xor:
    case GateKind::Xnor: return inputs == 2;
    default: return inputs >= 2;
  }
}

bool eval_gate(GateKind kind, std::span<const std::uint8_t> in) {
  bool v = false;
  switch (kind) {
    case GateKind::And:
    case GateKind::Nand:
      v = std::all_of(in.begin(), in.end(), [](std::uint8_t x) { return x != 0; });
      break;
    case GateKind::Or:
    case GateKind::Nor:
      v = std::any_of(in.begin(), in.end(), [](std::uint8_t x) { return x != 0; });
      break;
    case GateKind::Xor:
    case GateKind::Xnor:
      for (std::uint8_t x : in) v ^= (x != 0);
      break;
    case GateKind::Not:
    case GateKind::Buf: v = in[0] != 0; break;
  }
  return is_inverting(kind) ? !v : v;
}

std::size_t Circuit::input_index(NetId id) const {
  if (id >= nets_.size() || !nets_[id].is_primary_input()) {
    throw Error("circuit", "net " + std::to_string(id) + " is not a primary input");
  }
  return input_index_[id];
}

std::optional<NetId> Circuit::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

NetId Circuit::at(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw Error("circuit", "unknown net '" + std::string(name) + "'");
}

std::span<const NetId> Circuit::nets_at_level(std::uint32_t level) const {
  if (level > max_level_) return {};
  // Ids are sorted by level, so each level is a contiguous id range.
  return {level_ids_.data() + level_start_[level], level_start_[level + 1] - level_start_[level]};
}

CircuitBuilder CircuitBuilder::from(const Circuit& circuit) {
  CircuitBuilder b(circuit.name());
  for (NetId id : circuit.primary_inputs()) b.add_input(circuit.net(id).name);
  for (NetId id : circuit.primary_outputs()) b.add_output(circuit.net(id).name);
  for (const Gate& g : circuit.gates()) {
    std::vector<std::string> ins;
    ins.reserve(g.inputs.size());
    for (NetId in : g.inputs) ins.push_back(circuit.net(in).name);
    b.add_gate(g.kind, circuit.net(g.output).name, std::move(ins));
  }
  return b;
}

void CircuitBuilder::add_input(std::string net, std::size_t line) {
  inputs_.emplace_back(std::move(net), line);
}

void CircuitBuilder::add_output(std::string net, std::size_t line) {
  outputs_.emplace_back(std::move(net), line);
}

void CircuitBuilder::add_gate(GateKind kind, std::string output, std::vector<std::string> inputs,
                              std::size_t line) {
  gates_.push_back({kind, std::move(output), std::move(inputs), line});
}

Circuit CircuitBuilder::build() const {
  if (inputs_.empty()) throw ParseError(0, "no primary inputs");
  if (outputs_.empty()) throw ParseError(0, "no primary outputs");

  // Declaration slots: primary inputs first, then gate outputs.
  const std::size_t n_in = inputs_.size();
  const std::size_t n_slots = n_in + gates_.size();
  std::unordered_map<std::string, std::size_t> slot_of;
  slot_of.reserve(n_slots * 2);
  for (std::size_t i = 0; i < n_in; ++i) {
    const auto& [name, line] = inputs_[i];
    if (!slot_of.emplace(name, i).second) {
      throw ParseError(line, "net '" + name + "' is multiply driven");
    }
  }
  for (std::size_t g = 0; g < gates_.size(); ++g) {
    const GateDecl& d = gates_[g];
    if (!valid_arity(d.kind, d.inputs.size())) {
      throw ParseError(d.line, std::string(to_string(d.kind)) + " gate '" + d.output +
                                   "' has invalid fan-in " + std::to_string(d.inputs.size()));
    }
    if (!slot_of.emplace(d.output, n_in + g).second) {
      throw ParseError(d.line, "net '" + d.output + "' is multiply driven");
    }
  }

  std::vector<std::vector<std::size_t>> gate_inputs(gates_.size());
  std::vector<std::vector<std::size_t>> sinks(n_slots);  // slot -> reading gates
  for (std::size_t g = 0; g < gates_.size(); ++g) {
    for (const std::string& in : gates_[g].inputs) {
      auto it = slot_of.find(in);
      if (it == slot_of.end()) {
        throw ParseError(gates_[g].line, "net '" + in + "' is undriven");
      }
      gate_inputs[g].push_back(it->second);
      sinks[it->second].push_back(g);
    }
  }
  for (const auto& [name, line] : outputs_) {
    if (!slot_of.contains(name)) throw ParseError(line, "output net '" + name + "' is undriven");
  }

  // Kahn's algorithm over gates; levels follow as we go.
  std::vector<std::uint32_t> level(n_slots, 0);
  std::vector<std::size_t> pending(gates_.size());
  std::vector<std::size_t> ready;
  for (std::size_t g = 0; g < gates_.size(); ++g) {
    pending[g] = std::count_if(gate_inputs[g].begin(), gate_inputs[g].end(),
                               [&](std::size_t s) { return s >= n_in; });
    if (pending[g] == 0) ready.push_back(g);
  }
  std::size_t processed = 0;
  while (!ready.empty()) {
    std::size_t g = ready.back();
    ready.pop_back();
    ++processed;
    std::uint32_t lv = 0;
    for (std::size_t s : gate_inputs[g]) lv = std::max(lv, level[s]);
    level[n_in + g] = lv + 1;
    for (std::size_t sink : sinks[n_in + g]) {
      if (--pending[sink] == 0) ready.push_back(sink);
    }
  }
  if (processed != gates_.size()) {
    for (std::size_t g = 0; g < gates_.size(); ++g) {
      if (pending[g] != 0) {
        throw ParseError(gates_[g].line,
                         "combinational cycle through net '" + gates_[g].output + "'");
      }
    }
  }

  std::vector<std::size_t> order(n_slots);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return level[a] < level[b]; });
  std::vector<NetId> id_of(n_slots);
  for (std::size_t i = 0; i < n_slots; ++i) id_of[order[i]] = static_cast<NetId>(i);

  Circuit c;
  c.name_ = name_;
  c.nets_.resize(n_slots);
  c.gates_.resize(gates_.size());
  c.by_name_.reserve(n_slots * 2);
  GateId next_gate = 0;
  for (std::size_t i = 0; i < n_slots; ++i) {
    const std::size_t slot = order[i];
    Net& net = c.nets_[i];
    net.id = static_cast<NetId>(i);
    net.level = level[slot];
    if (slot < n_in) {
      net.name = inputs_[slot].first;
      net.driver = kPrimaryInput;
    } else {
      const std::size_t g = slot - n_in;
      net.name = gates_[g].output;
      net.driver = next_gate;
      Gate& gate = c.gates_[next_gate];
      gate.id = next_gate;
      gate.kind = gates_[g].kind;
      gate.output = net.id;
      gate.inputs.reserve(gate_inputs[g].size());
      for (std::size_t s : gate_inputs[g]) gate.inputs.push_back(id_of[s]);
      ++next_gate;
    }
    c.by_name_.emplace(net.name, net.id);
    c.max_level_ = std::max(c.max_level_, net.level);
  }
  for (const Gate& g : c.gates_) {
    for (std::uint32_t pin = 0; pin < g.inputs.size(); ++pin) {
      c.nets_[g.inputs[pin]].fanout.push_back({g.id, pin});
    }
  }

  c.input_index_.assign(n_slots, 0);
  for (std::size_t i = 0; i < n_in; ++i) {
    const NetId id = id_of[i];
    c.inputs_.push_back(id);
    c.input_index_[id] = i;
  }
  c.output_flag_.assign(n_slots, 0);
  for (const auto& [name, line] : outputs_) {
    const NetId id = id_of[slot_of.at(name)];
    if (c.output_flag_[id]) throw ParseError(line, "output '" + name + "' declared twice");
    c.output_flag_[id] = 1;
    c.outputs_.push_back(id);
  }

  c.level_start_.assign(c.max_level_ + 2, 0);
  for (const Net& n : c.nets_) ++c.level_start_[n.level + 1];
  std::partial_sum(c.level_start_.begin(), c.level_start_.end(), c.level_start_.begin());
  c.level_ids_.resize(n_slots);
  std::iota(c.level_ids_.begin(), c.level_ids_.end(), NetId{0});
  return c;
}

std::vector<std::uint32_t> levelize(const Circuit& circuit) {
  const auto nets = circuit.nets();
  const auto gates = circuit.gates();
  std::vector<std::uint32_t> level(nets.size(), 0);
  std::vector<std::size_t> pending(gates.size(), 0);
  std::vector<GateId> ready;
  for (const Gate& g : gates) {
    for (NetId in : g.inputs) {
      if (!nets[in].is_primary_input()) ++pending[g.id];
    }
    if (pending[g.id] == 0) ready.push_back(g.id);
  }
  std::size_t processed = 0;
  while (!ready.empty()) {
    const Gate& g = gates[ready.back()];
    ready.pop_back();
    ++processed;
    std::uint32_t lv = 0;
    for (NetId in : g.inputs) lv = std::max(lv, level[in]);
    level[g.output] = lv + 1;
    for (const Pin& p : nets[g.output].fanout) {
      if (--pending[p.gate] == 0) ready.push_back(p.gate);
    }
  }
  if (processed != gates.size()) throw Error("circuit", "cycle detected during levelization");
  return level;
}

bool isomorphic(const Circuit& a, const Circuit& b) {
  if (a.net_count() != b.net_count() || a.gate_count() != b.gate_count() ||
      a.primary_inputs().size() != b.primary_inputs().size() ||
      a.primary_outputs().size() != b.primary_outputs().size()) {
    return false;
  }
  // Shared interner: equal structure <=> equal canonical id. All supported
  // gate kinds are symmetric, so input lists are compared as sorted multisets.
  std::map<std::vector<std::uint64_t>, std::uint64_t> interner;
  auto canonical = [&](const Circuit& c) {
    std::vector<std::uint64_t> id(c.net_count());
    for (const Net& n : c.nets()) {
      std::vector<std::uint64_t> key;
      if (n.is_primary_input()) {
        key = {0, c.input_index(n.id)};
      } else {
        const Gate& g = c.gate(n.driver);
        key.push_back(1 + static_cast<std::uint64_t>(g.kind));
        for (NetId in : g.inputs) key.push_back(id[in]);
        std::sort(key.begin() + 1, key.end());
      }
      auto [it, inserted] = interner.try_emplace(std::move(key), interner.size());
      id[n.id] = it->second;
    }
    return id;
  };
  const auto ca = canonical(a);
  const auto cb = canonical(b);
  std::vector<std::uint64_t> ga, gb;
  for (const Gate& g : a.gates()) ga.push_back(ca[g.output]);
  for (const Gate& g : b.gates()) gb.push_back(cb[g.output]);
  std::sort(ga.begin(), ga.end());
  std::sort(gb.begin(), gb.end());
  if (ga != gb) return false;
  for (std::size_t i = 0; i < a.primary_outputs().size(); ++i) {
    if (ca[a.primary_outputs()[i]] != cb[b.primary_outputs()[i]]) return false;
  }
  return true;
}

ConeIndex::ConeIndex(const Circuit& circuit)
    : count_(circuit.net_count()), words_((circuit.net_count() + 63) / 64) {
  rows_.assign(count_ * words_, 0);
  for (std::size_t i = count_; i-- > 0;) {
    std::uint64_t* row = &rows_[i * words_];
    for (const Pin& p : circuit.net(static_cast<NetId>(i)).fanout) {
      const NetId out = circuit.gate(p.gate).output;
      row[out / 64] |= std::uint64_t{1} << (out % 64);
      const std::uint64_t* sub = &rows_[out * words_];
      for (std::size_t w = 0; w < words_; ++w) row[w] |= sub[w];
    }
  }
}

Circuit load_circuit(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("parse", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    return parse_json_netlist(ss.str());
  }
  std::string stem = path.substr(path.find_last_of('/') + 1);
  stem = stem.substr(0, stem.find('.'));
  return parse_bench(ss.str(), stem);
}

}  // namespace htrl
