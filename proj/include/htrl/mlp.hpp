#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace htrl {

// Fully connected network: tanh hidden layers, linear output. Parameters are
// stored flat, layer by layer, each as a row-major weight matrix (out x in)
// followed by the bias vector.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<std::size_t> sizes);

  // Gaussian weights with std gain/sqrt(fan_in) (hidden_gain for hidden
  // layers, output_gain for the last), zero biases.
  void init(std::mt19937_64& rng, double hidden_gain, double output_gain);

  // Activations of every layer; act[0] is the input, act.back() the output.
  struct Tape {
    std::vector<std::vector<double>> act;
  };

  void forward(std::span<const double> input, Tape& tape) const;
  std::vector<double> forward(std::span<const double> input) const;

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
  void backward(const Tape& tape, std::span<const double> grad_output,
                std::span<double> grad) const;

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;  // start of each layer's weights
  std::vector<double> params_;
};

}  // namespace htrl
