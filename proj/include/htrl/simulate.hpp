#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "htrl/circuit.hpp"

namespace htrl {

// Net forced to a constant, e.g. a stuck-at fault site.
struct ForcedNet {
  NetId net;
  bool value;
};

// Scalar reference simulator. `assignment` must cover every primary input;
// throws htrl::Error otherwise. Returns one 0/1 value per net.
std::vector<std::uint8_t> evaluate(const Circuit& circuit, const Assignment& assignment,
                                   std::optional<ForcedNet> force = std::nullopt);

// Primary-output values under a full assignment.
std::map<NetId, bool> simulate(const Circuit& circuit, const Assignment& assignment);

// Input patterns packed 64 per word. Bit b of word w in row i is the value of
// primary input i in pattern 64*w + b.
class PatternBlock {
 public:
  PatternBlock(std::size_t inputs, std::size_t words)
      : inputs_(inputs), words_(words), data_(inputs * words, 0) {}

  std::size_t inputs() const { return inputs_; }
  std::size_t words() const { return words_; }
  std::size_t patterns() const { return words_ * 64; }

  std::span<std::uint64_t> row(std::size_t input) { return {&data_[input * words_], words_}; }
  std::span<const std::uint64_t> row(std::size_t input) const {
    return {&data_[input * words_], words_};
  }
  bool bit(std::size_t input, std::size_t pattern) const {
    return (data_[input * words_ + pattern / 64] >> (pattern % 64)) & 1U;
  }

  // Uniformly random patterns drawn from `rng`.
  static PatternBlock random(std::size_t inputs, std::size_t words, std::mt19937_64& rng);
  // Patterns first_word*64 ... (first_word+words)*64-1 of the binary count
  // where primary input i is bit i of the pattern index.
  static PatternBlock counting(std::size_t inputs, std::uint64_t first_word, std::size_t words);

 private:
  std::size_t inputs_;
  std::size_t words_;
  std::vector<std::uint64_t> data_;
};

// Bit-parallel simulation kernels. Output is net-major: word w of net n is at
// out[n * block.words() + w]. Both variants produce identical results; the
// serial one is the reference the OpenMP one is tested against.
namespace kernels {

void simulate_words_serial(const Circuit& circuit, const PatternBlock& block,
                           std::span<std::uint64_t> out,
                           std::optional<ForcedNet> force = std::nullopt);

void simulate_words_parallel(const Circuit& circuit, const PatternBlock& block,
                             std::span<std::uint64_t> out,
                             std::optional<ForcedNet> force = std::nullopt);

}  // namespace kernels

// Convenience wrapper over the parallel kernel.
std::vector<std::uint64_t> simulate_words(const Circuit& circuit, const PatternBlock& block,
                                          std::optional<ForcedNet> force = std::nullopt);

}  // namespace htrl
