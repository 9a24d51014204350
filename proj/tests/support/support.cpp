#include "support.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace htrl::test {
namespace {

constexpr long long kInf = 1LL << 40;

bool eval_plain_gate(const std::string& kind, const std::vector<bool>& v) {
  const auto ones = std::count(v.begin(), v.end(), true);
  const auto n = static_cast<long>(v.size());
  if (kind == "AND") return ones == n;
  if (kind == "NAND") return ones != n;
  if (kind == "OR") return ones > 0;
  if (kind == "NOR") return ones == 0;
  if (kind == "XOR") return ones % 2 == 1;
  if (kind == "XNOR") return ones % 2 == 0;
  if (kind == "NOT") return !v[0];
  if (kind == "BUF" || kind == "BUFF") return v[0];
  throw std::runtime_error("oracle: unknown gate " + kind);
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

PlainNetlist random_netlist(std::mt19937_64& rng, std::size_t n_inputs, std::size_t n_gates) {
  static const char* kinds[] = {"AND", "NAND", "OR", "NOR", "XOR", "XNOR", "NOT", "BUF"};
  PlainNetlist n;
  std::vector<std::string> pool;
  for (std::size_t i = 0; i < n_inputs; ++i) {
    n.inputs.push_back("i" + std::to_string(i));
    pool.push_back(n.inputs.back());
  }
  std::map<std::string, int> uses;
  std::uniform_int_distribution<int> kind_dist(0, 7);
  for (std::size_t g = 0; g < n_gates; ++g) {
    std::string kind = kinds[kind_dist(rng)];
    std::size_t arity = 2;
    if (kind == "NOT" || kind == "BUF") arity = 1;
    else if (kind != "XOR" && kind != "XNOR") arity = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
    arity = std::min(arity, pool.size());
    if (arity < 2 && kind != "NOT" && kind != "BUF") kind = "NOT", arity = 1;
    // Bias towards recent nets so the circuit gets deep.
    std::set<std::string> chosen;
    while (chosen.size() < arity) {
      std::size_t lo = pool.size() > 8 && rng() % 2 ? pool.size() - 8 : 0;
      chosen.insert(pool[std::uniform_int_distribution<std::size_t>(lo, pool.size() - 1)(rng)]);
    }
    PlainGate pg{kind, "g" + std::to_string(g), {chosen.begin(), chosen.end()}};
    std::shuffle(pg.ins.begin(), pg.ins.end(), rng);
    for (const auto& in : pg.ins) ++uses[in];
    pool.push_back(pg.out);
    n.gates.push_back(std::move(pg));
  }
  for (const auto& g : n.gates) {
    if (!uses.count(g.out) || rng() % 8 == 0) n.outputs.push_back(g.out);
  }
  if (n.outputs.empty()) n.outputs.push_back(n.gates.empty() ? n.inputs[0] : n.gates.back().out);
  return n;
}

Circuit build(const PlainNetlist& n, const std::string& name) {
  CircuitBuilder b(name);
  for (const auto& i : n.inputs) b.add_input(i);
  for (const auto& o : n.outputs) b.add_output(o);
  for (const auto& g : n.gates) b.add_gate(*parse_gate_kind(g.kind), g.out, g.ins);
  return b.build();
}

PlainNetlist to_plain(const Circuit& c) {
  PlainNetlist n;
  for (NetId id : c.primary_inputs()) n.inputs.push_back(c.net(id).name);
  for (NetId id : c.primary_outputs()) n.outputs.push_back(c.net(id).name);
  for (const Gate& g : c.gates()) {
    PlainGate pg{upper(std::string(to_string(g.kind))), c.net(g.output).name, {}};
    if (pg.kind == "BUFF") pg.kind = "BUF";
    for (NetId in : g.inputs) pg.ins.push_back(c.net(in).name);
    n.gates.push_back(std::move(pg));
  }
  return n;
}

std::string to_bench(const PlainNetlist& n) {
  std::ostringstream os;
  for (const auto& i : n.inputs) os << "INPUT(" << i << ")\n";
  for (const auto& o : n.outputs) os << "OUTPUT(" << o << ")\n";
  for (const auto& g : n.gates) {
    os << g.out << " = " << (g.kind == "BUF" ? "BUFF" : g.kind) << "(";
    for (std::size_t i = 0; i < g.ins.size(); ++i) os << (i ? ", " : "") << g.ins[i];
    os << ")\n";
  }
  return os.str();
}

Values plain_eval(const PlainNetlist& n, const Values& inputs,
                  std::optional<std::pair<std::string, bool>> force) {
  std::map<std::string, const PlainGate*> driver;
  for (const auto& g : n.gates) driver[g.out] = &g;
  Values v;
  std::function<bool(const std::string&)> get = [&](const std::string& net) -> bool {
    if (force && force->first == net) return force->second;
    if (auto it = v.find(net); it != v.end()) return it->second;
    bool r;
    if (auto d = driver.find(net); d != driver.end()) {
      std::vector<bool> ins;
      for (const auto& in : d->second->ins) ins.push_back(get(in));
      r = eval_plain_gate(d->second->kind, ins);
    } else {
      r = inputs.at(net);
    }
    v[net] = r;
    return r;
  };
  for (const auto& i : n.inputs) get(i);
  for (const auto& g : n.gates) get(g.out);
  if (force) v[force->first] = force->second;
  return v;
}

PlainNetlist read_verilog(const std::string& text) {
  // Tokenize: identifiers (incl. escaped \name), punctuation.
  std::vector<std::string> tok;
  for (std::size_t i = 0; i < text.size();) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '*') {
      i = text.find("*/", i + 2);
      if (i == std::string::npos) throw std::runtime_error("verilog: open comment");
      i += 2;
    } else if (c == '\\') {
      std::size_t j = i + 1;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      tok.push_back(text.substr(i + 1, j - i - 1));
      i = j;
    } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
      std::size_t j = i;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) ||
                                 text[j] == '_' || text[j] == '$')) {
        ++j;
      }
      tok.push_back(text.substr(i, j - i));
      i = j;
    } else {
      tok.push_back(std::string(1, c));
      ++i;
    }
  }
  PlainNetlist n;
  std::size_t p = 0;
  auto expect = [&](const std::string& s) {
    if (p >= tok.size() || tok[p] != s) {
      throw std::runtime_error("verilog: expected '" + s + "' got '" +
                               (p < tok.size() ? tok[p] : "EOF") + "'");
    }
    ++p;
  };
  expect("module");
  ++p;  // module name
  expect("(");
  while (tok[p] != ")") {
    const std::string dir = tok[p++];
    if (tok[p] == "wire") ++p;
    const std::string name = tok[p++];
    if (dir == "input") n.inputs.push_back(name);
    else if (dir == "output") n.outputs.push_back(name);
    else throw std::runtime_error("verilog: bad port direction " + dir);
    if (tok[p] == ",") ++p;
  }
  expect(")");
  expect(";");
  static const std::set<std::string> prims{"and", "nand", "or", "nor", "xor", "xnor", "not", "buf"};
  while (p < tok.size() && tok[p] != "endmodule") {
    const std::string kw = tok[p++];
    if (kw == "wire") {
      while (tok[p] != ";") ++p;
      ++p;
    } else if (prims.count(kw)) {
      if (tok[p] != "(") ++p;  // instance name
      expect("(");
      std::vector<std::string> pins;
      while (tok[p] != ")") {
        pins.push_back(tok[p++]);
        if (tok[p] == ",") ++p;
      }
      expect(")");
      expect(";");
      PlainGate g{upper(kw), pins.front(), {pins.begin() + 1, pins.end()}};
      n.gates.push_back(std::move(g));
    } else {
      throw std::runtime_error("verilog: unexpected '" + kw + "'");
    }
  }
  expect("endmodule");
  return n;
}

PlainScoap plain_scoap(const PlainNetlist& n) {
  PlainScoap s;
  auto add = [](long long a, long long b) { return std::min(kInf, a + b); };
  for (const auto& i : n.inputs) s.cc0[i] = s.cc1[i] = 1;
  for (const auto& g : n.gates) s.cc0[g.out] = s.cc1[g.out] = kInf;
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& g : n.gates) {
      long long c0 = kInf, c1 = kInf;
      long long sum0 = 0, sum1 = 0, min0 = kInf, min1 = kInf;
      for (const auto& in : g.ins) {
        sum0 = add(sum0, s.cc0[in]);
        sum1 = add(sum1, s.cc1[in]);
        min0 = std::min(min0, s.cc0[in]);
        min1 = std::min(min1, s.cc1[in]);
      }
      const auto& k = g.kind;
      if (k == "AND") c0 = min0, c1 = sum1;
      if (k == "NAND") c0 = sum1, c1 = min0;
      if (k == "OR") c0 = sum0, c1 = min1;
      if (k == "NOR") c0 = min1, c1 = sum0;
      if (k == "NOT") c0 = s.cc1[g.ins[0]], c1 = s.cc0[g.ins[0]];
      if (k == "BUF") c0 = s.cc0[g.ins[0]], c1 = s.cc1[g.ins[0]];
      if (k == "XOR" || k == "XNOR") {
        const auto &a = g.ins[0], &b = g.ins[1];
        const long long same = std::min(add(s.cc0[a], s.cc0[b]), add(s.cc1[a], s.cc1[b]));
        const long long diff = std::min(add(s.cc0[a], s.cc1[b]), add(s.cc1[a], s.cc0[b]));
        c0 = k == "XOR" ? same : diff;
        c1 = k == "XOR" ? diff : same;
      }
      c0 = add(c0, 1);
      c1 = add(c1, 1);
      if (c0 != s.cc0[g.out] || c1 != s.cc1[g.out]) {
        s.cc0[g.out] = c0;
        s.cc1[g.out] = c1;
        changed = true;
      }
    }
  }
  for (const auto& [net, v] : s.cc0) s.co[net] = kInf;
  for (const auto& o : n.outputs) s.co[o] = 0;
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& g : n.gates) {
      if (s.co[g.out] >= kInf) continue;
      for (std::size_t i = 0; i < g.ins.size(); ++i) {
        long long side = 0;
        const auto& k = g.kind;
        for (std::size_t j = 0; j < g.ins.size(); ++j) {
          if (j == i) continue;
          if (k == "AND" || k == "NAND") side = add(side, s.cc1[g.ins[j]]);
          if (k == "OR" || k == "NOR") side = add(side, s.cc0[g.ins[j]]);
          if (k == "XOR" || k == "XNOR") side = std::min(s.cc0[g.ins[j]], s.cc1[g.ins[j]]);
        }
        const long long c = add(add(s.co[g.out], side), 1);
        if (c < s.co[g.ins[i]]) {
          s.co[g.ins[i]] = c;
          changed = true;
        }
      }
    }
  }
  return s;
}

bool plain_detectable(const PlainNetlist& n, const std::string& net, bool stuck) {
  const std::size_t k = n.inputs.size();
  for (std::uint64_t p = 0; p < (std::uint64_t{1} << k); ++p) {
    Values in;
    for (std::size_t i = 0; i < k; ++i) in[n.inputs[i]] = (p >> i) & 1;
    const Values good = plain_eval(n, in);
    const Values bad = plain_eval(n, in, std::make_pair(net, stuck));
    for (const auto& o : n.outputs) {
      if (good.at(o) != bad.at(o)) return true;
    }
  }
  return false;
}

std::string data_path(const std::string& rel) { return std::string(HTRL_DATA_DIR) + "/" + rel; }

}  // namespace htrl::test
