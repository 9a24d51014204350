#include "htrl/simulate.hpp"

#include <algorithm>

#include <omp.h>

#include "htrl/error.hpp"

namespace htrl {
namespace {

// Evaluates gate `g` for words [begin, end) of the net-major buffer.
inline void eval_gate_words(const Gate& g, std::uint64_t* out, std::size_t stride,
                            std::size_t begin, std::size_t end) {
  std::uint64_t* dst = out + g.output * stride;
  const std::uint64_t* a = out + g.inputs[0] * stride;
  switch (g.kind) {
    case GateKind::Buf:
    case GateKind::Not:
      for (std::size_t w = begin; w < end; ++w) dst[w] = a[w];
      break;
    case GateKind::And:
    case GateKind::Nand:
      for (std::size_t w = begin; w < end; ++w) dst[w] = a[w];
      for (std::size_t k = 1; k < g.inputs.size(); ++k) {
        const std::uint64_t* b = out + g.inputs[k] * stride;
        for (std::size_t w = begin; w < end; ++w) dst[w] &= b[w];
      }
      break;
    case GateKind::Or:
    case GateKind::Nor:
      for (std::size_t w = begin; w < end; ++w) dst[w] = a[w];
      for (std::size_t k = 1; k < g.inputs.size(); ++k) {
        const std::uint64_t* b = out + g.inputs[k] * stride;
        for (std::size_t w = begin; w < end; ++w) dst[w] |= b[w];
      }
      break;
    case GateKind::Xor:
    case GateKind::Xnor:
      for (std::size_t w = begin; w < end; ++w) dst[w] = a[w];
      for (std::size_t k = 1; k < g.inputs.size(); ++k) {
        const std::uint64_t* b = out + g.inputs[k] * stride;
        for (std::size_t w = begin; w < end; ++w) dst[w] ^= b[w];
      }
      break;
  }
  if (is_inverting(g.kind)) {
    for (std::size_t w = begin; w < end; ++w) dst[w] = ~dst[w];
  }
}

void simulate_range(const Circuit& circuit, const PatternBlock& block, std::uint64_t* out,
                    std::size_t begin, std::size_t end, std::optional<ForcedNet> force) {
  const std::size_t stride = block.words();
  auto apply_force = [&](NetId net) {
    if (force && force->net == net) {
      const std::uint64_t v = force->value ? ~std::uint64_t{0} : 0;
      std::fill(out + net * stride + begin, out + net * stride + end, v);
    }
  };
  const auto inputs = circuit.primary_inputs();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto row = block.row(i);
    std::copy(row.begin() + begin, row.begin() + end, out + inputs[i] * stride + begin);
    apply_force(inputs[i]);
  }
  for (const Gate& g : circuit.gates()) {
    eval_gate_words(g, out, stride, begin, end);
    apply_force(g.output);
  }
}

void check_shape(const Circuit& circuit, const PatternBlock& block, std::span<std::uint64_t> out) {
  if (block.inputs() != circuit.primary_inputs().size()) {
    throw Error("sim", "pattern block has " + std::to_string(block.inputs()) +
                           " inputs, circuit has " +
                           std::to_string(circuit.primary_inputs().size()));
  }
  if (out.size() != circuit.net_count() * block.words()) {
    throw Error("sim", "output buffer size mismatch");
  }
}

}  // namespace

std::vector<std::uint8_t> evaluate(const Circuit& circuit, const Assignment& assignment,
                                   std::optional<ForcedNet> force) {
  std::vector<std::uint8_t> value(circuit.net_count(), 0);
  for (NetId pi : circuit.primary_inputs()) {
    auto it = assignment.find(pi);
    if (it == assignment.end()) {
      throw Error("sim", "missing value for primary input '" + circuit.net(pi).name + "'");
    }
    value[pi] = it->second;
    if (force && force->net == pi) value[pi] = force->value;
  }
  std::vector<std::uint8_t> in;
  for (const Gate& g : circuit.gates()) {
    in.clear();
    for (NetId n : g.inputs) in.push_back(value[n]);
    value[g.output] = eval_gate(g.kind, in);
    if (force && force->net == g.output) value[g.output] = force->value;
  }
  return value;
}

std::map<NetId, bool> simulate(const Circuit& circuit, const Assignment& assignment) {
  const auto value = evaluate(circuit, assignment);
  std::map<NetId, bool> out;
  for (NetId po : circuit.primary_outputs()) out[po] = value[po] != 0;
  return out;
}

PatternBlock PatternBlock::random(std::size_t inputs, std::size_t words, std::mt19937_64& rng) {
  PatternBlock block(inputs, words);
  for (auto& w : block.data_) w = rng();
  return block;
}

PatternBlock PatternBlock::counting(std::size_t inputs, std::uint64_t first_word,
                                    std::size_t words) {
  static constexpr std::uint64_t kLow[6] = {0xAAAAAAAAAAAAAAAAULL, 0xCCCCCCCCCCCCCCCCULL,
                                            0xF0F0F0F0F0F0F0F0ULL, 0xFF00FF00FF00FF00ULL,
                                            0xFFFF0000FFFF0000ULL, 0xFFFFFFFF00000000ULL};
  PatternBlock block(inputs, words);
  for (std::size_t i = 0; i < inputs; ++i) {
    auto row = block.row(i);
    for (std::size_t w = 0; w < words; ++w) {
      if (i < 6) {
        row[w] = kLow[i];
      } else {
        row[w] = ((first_word + w) >> (i - 6)) & 1U ? ~std::uint64_t{0} : 0;
      }
    }
  }
  return block;
}

namespace kernels {

void simulate_words_serial(const Circuit& circuit, const PatternBlock& block,
                           std::span<std::uint64_t> out, std::optional<ForcedNet> force) {
  check_shape(circuit, block, out);
  simulate_range(circuit, block, out.data(), 0, block.words(), force);
}

void simulate_words_parallel(const Circuit& circuit, const PatternBlock& block,
                             std::span<std::uint64_t> out, std::optional<ForcedNet> force) {
  check_shape(circuit, block, out);
  // One contiguous slice per thread. Small slices interleave the net-major
  // rows badly and ran 3x slower than the serial loop.
  const std::size_t words = block.words();
#pragma omp parallel
  {
    const auto threads = static_cast<std::size_t>(omp_get_num_threads());
    const auto t = static_cast<std::size_t>(omp_get_thread_num());
    const std::size_t begin = words * t / threads;
    const std::size_t end = words * (t + 1) / threads;
    if (begin < end) simulate_range(circuit, block, out.data(), begin, end, force);
  }
}

}  // namespace kernels

std::vector<std::uint64_t> simulate_words(const Circuit& circuit, const PatternBlock& block,
                                          std::optional<ForcedNet> force) {
  std::vector<std::uint64_t> out(circuit.net_count() * block.words());
  kernels::simulate_words_parallel(circuit, block, out, force);
  return out;
}

}  // namespace htrl
