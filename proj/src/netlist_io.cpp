#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <unordered_set>

#include "htrl/circuit.hpp"
#include "htrl/error.hpp"
#include "json.hpp"

namespace htrl {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::toupper(static_cast<unsigned char>(x)) ==
                  std::toupper(static_cast<unsigned char>(y));
         });
}

bool valid_net_name(std::string_view s) {
  return !s.empty() && std::none_of(s.begin(), s.end(), [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == ',' ||
           c == '=' || c == '#';
  });
}

// Splits "KIND(a, b, c)" into kind text and argument names.
bool split_call(std::string_view text, std::string_view& head, std::vector<std::string>& args) {
  const auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') return false;
  head = trim(text.substr(0, open));
  std::string_view body = text.substr(open + 1, text.size() - open - 2);
  args.clear();
  if (trim(body).empty()) return true;
  std::size_t start = 0;
  while (true) {
    const auto comma = body.find(',', start);
    const std::string_view arg = trim(body.substr(start, comma - start));
    if (!valid_net_name(arg)) return false;
    args.emplace_back(arg);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return true;
}

}  // namespace

Circuit parse_bench(std::string_view text, std::string name) {
  CircuitBuilder builder(std::move(name));
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    std::string_view head;
    std::vector<std::string> args;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      if (!split_call(line, head, args) || args.size() != 1) {
        throw ParseError(line_no, "syntax error: '" + std::string(line) + "'");
      }
      if (iequals(head, "INPUT")) {
        builder.add_input(args[0], line_no);
      } else if (iequals(head, "OUTPUT")) {
        builder.add_output(args[0], line_no);
      } else {
        throw ParseError(line_no, "syntax error: expected INPUT or OUTPUT");
      }
      continue;
    }

    const std::string_view out = trim(line.substr(0, eq));
    if (!valid_net_name(out) || !split_call(trim(line.substr(eq + 1)), head, args)) {
      throw ParseError(line_no, "syntax error: '" + std::string(line) + "'");
    }
    const auto kind = parse_gate_kind(head);
    if (!kind) {
      if (iequals(head, "DFF")) throw ParseError(line_no, "sequential element DFF not supported");
      throw ParseError(line_no, "unknown gate kind '" + std::string(head) + "'");
    }
    builder.add_gate(*kind, std::string(out), std::move(args), line_no);
  }
  return builder.build();
}

std::string emit_bench(const Circuit& circuit) {
  std::ostringstream os;
  if (!circuit.name().empty()) os << "# " << circuit.name() << '\n';
  os << "# " << circuit.primary_inputs().size() << " inputs, "
     << circuit.primary_outputs().size() << " outputs, " << circuit.gate_count() << " gates\n\n";
  for (NetId id : circuit.primary_inputs()) os << "INPUT(" << circuit.net(id).name << ")\n";
  os << '\n';
  for (NetId id : circuit.primary_outputs()) os << "OUTPUT(" << circuit.net(id).name << ")\n";
  os << '\n';
  for (const Gate& g : circuit.gates()) {
    os << circuit.net(g.output).name << " = " << to_string(g.kind) << '(';
    for (std::size_t i = 0; i < g.inputs.size(); ++i) {
      if (i) os << ", ";
      os << circuit.net(g.inputs[i]).name;
    }
    os << ")\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON netlist

namespace {

using ojson = nlohmann::ordered_json;

std::optional<GateKind> cell_kind(const std::string& type) {
  static const std::pair<const char*, GateKind> table[] = {
      {"$_AND_", GateKind::And},   {"$_NAND_", GateKind::Nand}, {"$_OR_", GateKind::Or},
      {"$_NOR_", GateKind::Nor},   {"$_XOR_", GateKind::Xor},   {"$_XNOR_", GateKind::Xnor},
      {"$_NOT_", GateKind::Not},   {"$_BUF_", GateKind::Buf},   {"$and", GateKind::And},
      {"$or", GateKind::Or},       {"$xor", GateKind::Xor},     {"$xnor", GateKind::Xnor},
      {"$not", GateKind::Not},     {"$reduce_and", GateKind::And},
      {"$reduce_or", GateKind::Or}, {"$reduce_xor", GateKind::Xor},
      {"$reduce_xnor", GateKind::Xnor}};
  for (const auto& [name, kind] : table) {
    if (type == name) return kind;
  }
  return std::nullopt;
}

bool sequential_cell(std::string type) {
  std::transform(type.begin(), type.end(), type.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const char* marker : {"dff", "latch", "$sr", "$_sr", "$mem", "$fsm"}) {
    if (type.find(marker) != std::string::npos) return true;
  }
  return false;
}

long bit_of(const ojson& bit, const std::string& where) {
  if (!bit.is_number_integer()) {
    throw ParseError(0, where + ": constant or malformed bit " + bit.dump() + " not supported");
  }
  return bit.get<long>();
}

}  // namespace

Circuit parse_json_netlist(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.contains("modules") || !doc["modules"].is_object() || doc["modules"].empty()) {
    throw ParseError(0, "JSON netlist has no modules");
  }
  if (doc["modules"].size() != 1) {
    throw ParseError(0, "JSON netlist has " + std::to_string(doc["modules"].size()) +
                            " modules; expected one flattened module");
  }
  const std::string module_name = doc["modules"].begin().key();
  const ojson& mod = doc["modules"].begin().value();

  // Bit -> display name. Ports win over netnames; visible names over hidden.
  std::map<long, std::string> names;
  std::map<long, int> name_rank;
  auto offer = [&](long bit, const std::string& name, int rank) {
    auto it = name_rank.find(bit);
    if (it == name_rank.end() || rank < it->second) {
      name_rank[bit] = rank;
      names[bit] = name;
    }
  };
  auto indexed = [](const std::string& base, std::size_t width, std::size_t i) {
    return width == 1 ? base : base + "[" + std::to_string(i) + "]";
  };

  std::vector<long> input_bits, output_bits;
  if (mod.contains("ports")) {
    for (const auto& [port, desc] : mod["ports"].items()) {
      const std::string dir = desc.value("direction", "");
      const ojson& bits = desc.at("bits");
      for (std::size_t i = 0; i < bits.size(); ++i) {
        const long bit = bit_of(bits[i], "port '" + port + "'");
        offer(bit, indexed(port, bits.size(), i), 0);
        if (dir == "input") {
          input_bits.push_back(bit);
        } else if (dir == "output") {
          output_bits.push_back(bit);
        } else {
          throw ParseError(0, "port '" + port + "' has unsupported direction '" + dir + "'");
        }
      }
    }
  }
  if (mod.contains("netnames")) {
    for (const auto& [net, desc] : mod["netnames"].items()) {
      const int hidden = desc.value("hide_name", 0);
      const ojson& bits = desc.at("bits");
      for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i].is_number_integer()) {
          offer(bits[i].get<long>(), indexed(net, bits.size(), i), hidden ? 2 : 1);
        }
      }
    }
  }
  auto name_of = [&](long bit) {
    auto it = names.find(bit);
    return it != names.end() ? it->second : "n" + std::to_string(bit);
  };

  CircuitBuilder builder(module_name);
  for (long bit : input_bits) builder.add_input(name_of(bit));
  for (long bit : output_bits) builder.add_output(name_of(bit));

  if (mod.contains("cells")) {
    for (const auto& [cell, desc] : mod["cells"].items()) {
      const std::string type = desc.value("type", "");
      if (sequential_cell(type)) {
        throw ParseError(0, "cell '" + cell + "' is sequential (" + type + ")");
      }
      const auto kind = cell_kind(type);
      if (!kind) throw ParseError(0, "cell '" + cell + "' has unsupported type '" + type + "'");

      const ojson& dirs = desc.at("port_directions");
      const ojson& conns = desc.at("connections");
      std::vector<std::string> ins;
      std::vector<long> outs;
      for (const auto& [pin, dir] : dirs.items()) {
        for (const ojson& bit : conns.at(pin)) {
          const long b = bit_of(bit, "cell '" + cell + "'");
          if (dir.get<std::string>() == "output") {
            outs.push_back(b);
          } else {
            ins.push_back(name_of(b));
          }
        }
      }
      if (outs.size() != 1) {
        throw ParseError(0, "cell '" + cell + "' must drive exactly one bit");
      }
      builder.add_gate(*kind, name_of(outs[0]), std::move(ins));
    }
  }
  return builder.build();
}

// ---------------------------------------------------------------------------
// Verilog

namespace {

const std::unordered_set<std::string>& verilog_keywords() {
  static const std::unordered_set<std::string> kw = {
      "always", "and",    "assign",  "begin",  "buf",    "case",   "default", "else",
      "end",    "endcase", "endmodule", "for", "function", "if",   "initial", "inout",
      "input",  "integer", "module", "nand",   "nor",    "not",    "or",      "output",
      "parameter", "reg",  "supply0", "supply1", "task", "tri",    "wire",    "xnor",
      "xor",    "wand",   "wor"};
  return kw;
}

std::string_view primitive(GateKind kind) {
  switch (kind) {
    case GateKind::And: return "and";
    case GateKind::Nand: return "nand";
    case GateKind::Or: return "or";
    case GateKind::Nor: return "nor";
    case GateKind::Xor: return "xor";
    case GateKind::Xnor: return "xnor";
    case GateKind::Not: return "not";
    case GateKind::Buf: return "buf";
  }
  return "buf";
}

}  // namespace

std::string verilog_identifier(std::string_view name) {
  std::string id;
  id.reserve(name.size() + 1);
  for (char c : name) {
    id.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '_' ? c : '_');
  }
  if (id.empty() || std::isdigit(static_cast<unsigned char>(id.front()))) id.insert(0, "_");
  if (verilog_keywords().contains(id)) id.push_back('_');
  return id;
}

std::string emit_verilog(const Circuit& circuit) {
  // Sanitized names, with collisions resolved by net id order.
  std::vector<std::string> ident(circuit.net_count());
  std::unordered_set<std::string> used;
  auto claim = [&](std::string base) {
    std::string candidate = base;
    for (int k = 1; used.contains(candidate); ++k) candidate = base + "_" + std::to_string(k);
    used.insert(candidate);
    return candidate;
  };
  const std::string module = claim(verilog_identifier(circuit.name().empty() ? "top" : circuit.name()));
  for (const Net& n : circuit.nets()) ident[n.id] = claim(verilog_identifier(n.name));

  // A primary input that is also an output needs its own output port.
  std::vector<std::pair<std::string, NetId>> feedthrough;
  std::vector<std::string> out_ports;
  for (NetId id : circuit.primary_outputs()) {
    if (circuit.net(id).is_primary_input()) {
      out_ports.push_back(claim(ident[id] + "_po"));
      feedthrough.emplace_back(out_ports.back(), id);
    } else {
      out_ports.push_back(ident[id]);
    }
  }

  std::vector<std::string> instance(circuit.gate_count());
  for (const Gate& g : circuit.gates()) instance[g.id] = claim("g" + std::to_string(g.id));

  std::ostringstream os;
  os << "module " << module << " (\n";
  std::vector<std::string> ports;
  for (NetId id : circuit.primary_inputs()) ports.push_back("  input " + ident[id]);
  for (const std::string& p : out_ports) ports.push_back("  output " + p);
  for (std::size_t i = 0; i < ports.size(); ++i) {
    os << ports[i] << (i + 1 < ports.size() ? ",\n" : "\n");
  }
  os << ");\n";
  for (const Net& n : circuit.nets()) {
    if (!n.is_primary_input() && !circuit.is_primary_output(n.id)) {
      os << "  wire " << ident[n.id] << ";\n";
    }
  }
  for (const Gate& g : circuit.gates()) {
    os << "  " << primitive(g.kind) << ' ' << instance[g.id] << " (" << ident[g.output];
    for (NetId in : g.inputs) os << ", " << ident[in];
    os << ");\n";
  }
  for (const auto& [port, id] : feedthrough) {
    os << "  buf " << claim(port + "_buf") << " (" << port << ", " << ident[id] << ");\n";
  }
  os << "endmodule\n";
  return os.str();
}

}  // namespace htrl
