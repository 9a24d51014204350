#pragma once

// Test-side oracles. Nothing here uses the library's evaluation, levelization
// or SCOAP code: netlists are plain name-keyed records evaluated by memoized
// recursion, so they can be compared against the library's results.

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "htrl/circuit.hpp"

namespace htrl::test {

struct PlainGate {
  std::string kind;  // "AND", "NAND", "OR", "NOR", "XOR", "XNOR", "NOT", "BUF"
  std::string out;
  std::vector<std::string> ins;
};

struct PlainNetlist {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<PlainGate> gates;
};

// Random DAG: gate inputs are drawn from earlier nets; every sink becomes a
// primary output (plus the occasional internal net).
PlainNetlist random_netlist(std::mt19937_64& rng, std::size_t n_inputs, std::size_t n_gates);

Circuit build(const PlainNetlist& n, const std::string& name = "rand");
PlainNetlist to_plain(const Circuit& c);
std::string to_bench(const PlainNetlist& n);

using Values = std::map<std::string, bool>;

// Every net's value; `force` pins one net to a constant.
Values plain_eval(const PlainNetlist& n, const Values& inputs,
                  std::optional<std::pair<std::string, bool>> force = std::nullopt);

// Reads the structural Verilog subset the emitter produces (ANSI ports,
// wire declarations, primitive instances) with its own tokenizer.
PlainNetlist read_verilog(const std::string& text);

// Textbook SCOAP by iterating the defining equations to a fixed point.
struct PlainScoap {
  std::map<std::string, long long> cc0, cc1, co;
};
PlainScoap plain_scoap(const PlainNetlist& n);

// All-pattern detectability of a stuck-at fault by scalar evaluation.
bool plain_detectable(const PlainNetlist& n, const std::string& net, bool stuck);

std::string data_path(const std::string& rel);

}  // namespace htrl::test
