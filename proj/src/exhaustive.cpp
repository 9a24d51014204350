#include <algorithm>
#include <bit>

#include "htrl/atpg.hpp"
#include "htrl/error.hpp"
#include "htrl/simulate.hpp"

namespace htrl {

TestResult exhaustive_test(const Circuit& circuit, Fault fault) {
  const std::size_t n = circuit.primary_inputs().size();
  if (n > kMaxExhaustiveInputs) {
    throw Error("atpg", "exhaustive test limited to " + std::to_string(kMaxExhaustiveInputs) +
                            " inputs, circuit has " + std::to_string(n));
  }
  if (fault.net >= circuit.net_count()) {
    throw Error("atpg", "fault on unknown net " + std::to_string(fault.net));
  }
  const std::uint64_t total = std::uint64_t{1} << n;
  const std::uint64_t total_words = std::max<std::uint64_t>(1, total / 64);
  constexpr std::uint64_t kChunkWords = 1024;

  TestResult result;
  result.status = TestStatus::Untestable;
  for (std::uint64_t first = 0; first < total_words; first += kChunkWords) {
    const std::size_t words = static_cast<std::size_t>(std::min(kChunkWords, total_words - first));
    const PatternBlock block = PatternBlock::counting(n, first, words);
    const auto good = simulate_words(circuit, block);
    const auto bad = simulate_words(circuit, block, ForcedNet{fault.net, fault.stuck_value});
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t diff = 0;
      for (NetId po : circuit.primary_outputs()) {
        diff |= good[po * words + w] ^ bad[po * words + w];
      }
      // Fewer than 64 patterns exist when n < 6; ignore the padding bits.
      if (total < 64) diff &= (std::uint64_t{1} << total) - 1;
      if (diff == 0) continue;
      const std::uint64_t pattern = (first + w) * 64 + std::countr_zero(diff);
      result.status = TestStatus::Detected;
      for (std::size_t i = 0; i < n; ++i) {
        result.input_stack[circuit.primary_inputs()[i]] = (pattern >> i) & 1U;
      }
      return result;
    }
  }
  return result;
}

bool replay_detects(const Circuit& circuit, Fault fault, const Assignment& inputs) {
  Assignment full;
  for (NetId pi : circuit.primary_inputs()) {
    auto it = inputs.find(pi);
    full[pi] = it != inputs.end() && it->second;
  }
  const auto good = evaluate(circuit, full);
  const auto bad = evaluate(circuit, full, ForcedNet{fault.net, fault.stuck_value});
  return std::any_of(circuit.primary_outputs().begin(), circuit.primary_outputs().end(),
                     [&](NetId po) { return good[po] != bad[po]; });
}

}  // namespace htrl
