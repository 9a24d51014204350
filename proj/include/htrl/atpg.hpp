#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "htrl/circuit.hpp"
#include "htrl/scoap.hpp"

namespace htrl {

// Roth's five-valued logic. D is good 1 / faulty 0; Dbar is good 0 / faulty 1.
enum class Logic5 : std::uint8_t { Zero, One, X, D, Dbar };

std::string_view to_string(Logic5 v);
Logic5 eval5(GateKind kind, std::span<const Logic5> inputs);

struct Fault {
  NetId net;
  bool stuck_value;
};

enum class TestStatus : std::uint8_t {
  Detected,
  Untestable,  // search space exhausted
  Aborted,     // backtrack budget hit; not a proof of untestability
};

std::string_view to_string(TestStatus s);

struct TestResult {
  TestStatus status = TestStatus::Untestable;
  // Primary inputs PODEM assigned (exhaustive search: the full vector).
  Assignment input_stack;
  std::uint64_t backtracks = 0;

  bool detected() const { return status == TestStatus::Detected; }
};

inline constexpr std::uint64_t kDefaultBacktrackLimit = 10'000;

// Path-oriented decision making over five-valued logic with forward
// implication only. Objective and backtrace are guided by `table`.
TestResult podem(const Circuit& circuit, const ScoapTable& table, Fault fault,
                 std::uint64_t backtrack_limit = kDefaultBacktrackLimit);
// Computes the SCOAP table first.
TestResult podem(const Circuit& circuit, Fault fault,
                 std::uint64_t backtrack_limit = kDefaultBacktrackLimit);

inline constexpr std::size_t kMaxExhaustiveInputs = 24;

// Enumerates all 2^n input vectors (bit-parallel) and reports the first one,
// in counting order with input i as bit i, that exposes the fault.
TestResult exhaustive_test(const Circuit& circuit, Fault fault);

// Fault-simulation replay: completes `inputs` with 0 for unassigned primary
// inputs and checks that some primary output differs from the good circuit.
bool replay_detects(const Circuit& circuit, Fault fault, const Assignment& inputs);

}  // namespace htrl
