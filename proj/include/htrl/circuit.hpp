#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace htrl {

using NetId = std::uint32_t;
using GateId = std::uint32_t;

// Driver value for nets fed by a primary input rather than a gate.
inline constexpr GateId kPrimaryInput = std::numeric_limits<GateId>::max();

enum class GateKind : std::uint8_t { And, Nand, Or, Nor, Xor, Xnor, Not, Buf };

inline constexpr GateKind kAllGateKinds[] = {GateKind::And, GateKind::Nand, GateKind::Or,
                                             GateKind::Nor, GateKind::Xor,  GateKind::Xnor,
                                             GateKind::Not, GateKind::Buf};

// Upper-case bench spelling ("AND", "BUFF", ...).
std::string_view to_string(GateKind kind);
// Case-insensitive; accepts both BUF and BUFF.
std::optional<GateKind> parse_gate_kind(std::string_view text);

bool is_inverting(GateKind kind);
// Checks the fan-in rules: NOT/BUF take one input, XOR/XNOR exactly two,
// AND/NAND/OR/NOR two or more.
bool valid_arity(GateKind kind, std::size_t inputs);
// Evaluates a gate over plain Boolean inputs.
bool eval_gate(GateKind kind, std::span<const std::uint8_t> inputs);

struct Pin {
  GateId gate;
  std::uint32_t index;

  friend bool operator==(const Pin&, const Pin&) = default;
};

struct Net {
  NetId id = 0;
  std::string name;
  GateId driver = kPrimaryInput;
  std::vector<Pin> fanout;
  std::uint32_t level = 0;

  bool is_primary_input() const { return driver == kPrimaryInput; }
};

struct Gate {
  GateId id = 0;
  GateKind kind = GateKind::Buf;
  std::vector<NetId> inputs;
  NetId output = 0;
};

// Partial primary-input assignment. Keys are primary-input net ids; missing
// inputs are don't-care.
using Assignment = std::map<NetId, bool>;

class CircuitBuilder;

// Immutable combinational gate-level DAG.
//
// Net ids are dense and sorted by (level, declaration order), so the id order
// is a topological order and every same-level run is contiguous. Gate ids
// follow the ids of their output nets.
class Circuit {
 public:
  const std::string& name() const { return name_; }

  std::span<const Net> nets() const { return nets_; }
  std::span<const Gate> gates() const { return gates_; }
  const Net& net(NetId id) const { return nets_.at(id); }
  const Gate& gate(GateId id) const { return gates_.at(id); }
  std::size_t net_count() const { return nets_.size(); }
  std::size_t gate_count() const { return gates_.size(); }

  std::span<const NetId> primary_inputs() const { return inputs_; }
  std::span<const NetId> primary_outputs() const { return outputs_; }
  bool is_primary_output(NetId id) const { return output_flag_.at(id) != 0; }
  // Position of a primary input in primary_inputs(); throws for other nets.
  std::size_t input_index(NetId id) const;

  std::optional<NetId> find(std::string_view name) const;
  // Like find() but throws htrl::Error for unknown names.
  NetId at(std::string_view name) const;

  std::uint32_t max_level() const { return max_level_; }
  // Ascending ids of all nets at `level`; empty past max_level().
  std::span<const NetId> nets_at_level(std::uint32_t level) const;

 private:
  friend class CircuitBuilder;

  std::string name_;
  std::vector<Net> nets_;
  std::vector<Gate> gates_;
  std::vector<NetId> inputs_;
  std::vector<NetId> outputs_;
  std::vector<std::uint8_t> output_flag_;
  std::vector<std::size_t> input_index_;
  std::vector<std::size_t> level_start_;
  std::vector<NetId> level_ids_;  // 0..n-1; backs nets_at_level()
  std::uint32_t max_level_ = 0;
  std::unordered_map<std::string, NetId> by_name_;
};

// Collects a netlist by net names and produces a validated Circuit.
class CircuitBuilder {
 public:
  explicit CircuitBuilder(std::string name = {}) : name_(std::move(name)) {}

  // Starts from an existing circuit's structure (names preserved).
  static CircuitBuilder from(const Circuit& circuit);

  void set_name(std::string name) { name_ = std::move(name); }
  void add_input(std::string net, std::size_t line = 0);
  void add_output(std::string net, std::size_t line = 0);
  void add_gate(GateKind kind, std::string output, std::vector<std::string> inputs,
                std::size_t line = 0);

  // Throws ParseError on undriven or multiply-driven nets, bad arity,
  // combinational cycles, or missing primary inputs/outputs.
  Circuit build() const;

 private:
  struct GateDecl {
    GateKind kind;
    std::string output;
    std::vector<std::string> inputs;
    std::size_t line;
  };

  std::string name_;
  std::vector<std::pair<std::string, std::size_t>> inputs_;
  std::vector<std::pair<std::string, std::size_t>> outputs_;
  std::vector<GateDecl> gates_;
};

// Recomputes levels from the gate structure alone: primary inputs at 0, gate
// outputs at max(input levels) + 1. Throws if the structure has a cycle.
std::vector<std::uint32_t> levelize(const Circuit& circuit);

// Structural isomorphism: identical up to net/gate renumbering and renaming,
// anchoring primary inputs and outputs by their position.
bool isomorphic(const Circuit& a, const Circuit& b);

// Transitive-fanout closure of every net, stored as one bitset row per net.
// reaches(a, b) is true iff a directed path of length >= 1 leads from a to b.
class ConeIndex {
 public:
  explicit ConeIndex(const Circuit& circuit);

  bool reaches(NetId from, NetId to) const {
    return (rows_[from * words_ + to / 64] >> (to % 64)) & 1U;
  }
  // Either reaches the other.
  bool related(NetId a, NetId b) const { return reaches(a, b) || reaches(b, a); }
  std::size_t net_count() const { return count_; }

 private:
  std::size_t count_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> rows_;
};

// Bench text I/O.
Circuit parse_bench(std::string_view text, std::string name = {});
std::string emit_bench(const Circuit& circuit);

// Yosys-style JSON netlist (single flattened module of gate cells).
Circuit parse_json_netlist(std::string_view text);

// Structural Verilog with primitive gate instances and an ANSI port list.
std::string emit_verilog(const Circuit& circuit);
// Deterministic Verilog-safe identifier for a net name.
std::string verilog_identifier(std::string_view name);

// Reads a netlist file, choosing the parser by extension (.json or bench).
Circuit load_circuit(const std::string& path);

}  // namespace htrl
