#include "htrl/mlp.hpp"

#include <cmath>

#include "htrl/error.hpp"

namespace htrl {

Mlp::Mlp(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw Error("ppo", "network needs an input and an output layer");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l + 1] * (sizes_[l] + 1);
  }
  params_.assign(total, 0.0);
}

void Mlp::init(std::mt19937_64& rng, double hidden_gain, double output_gain) {
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double gain = l + 1 == layers ? output_gain : hidden_gain;
    std::normal_distribution<double> dist(0.0, gain / std::sqrt(static_cast<double>(in)));
    double* w = params_.data() + offsets_[l];
    for (std::size_t i = 0; i < out * in; ++i) w[i] = dist(rng);
    for (std::size_t i = 0; i < out; ++i) w[out * in + i] = 0.0;
  }
}

void Mlp::forward(std::span<const double> input, Tape& tape) const {
  if (input.size() != input_size()) {
    throw Error("ppo", "network input has " + std::to_string(input.size()) + " values, expected " +
                           std::to_string(input_size()));
  }
  const std::size_t layers = sizes_.size() - 1;
  tape.act.resize(sizes_.size());
  tape.act[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = w + out * in;
    const std::vector<double>& x = tape.act[l];
    std::vector<double>& y = tape.act[l + 1];
    y.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) s += row[i] * x[i];
      y[o] = l + 1 == layers ? s : std::tanh(s);
    }
  }
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  Tape tape;
  forward(input, tape);
  return tape.act.back();
}

void Mlp::backward(const Tape& tape, std::span<const double> grad_output,
                   std::span<double> grad) const {
  const std::size_t layers = sizes_.size() - 1;
  std::vector<double> delta(grad_output.begin(), grad_output.end());
  std::vector<double> next;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    double* gw = grad.data() + offsets_[l];
    double* gb = gw + out * in;
    const std::vector<double>& x = tape.act[l];
    if (l + 1 != layers) {
      // tanh'(s) = 1 - y^2
      const std::vector<double>& y = tape.act[l + 1];
      for (std::size_t o = 0; o < out; ++o) delta[o] *= 1.0 - y[o] * y[o];
    }
    for (std::size_t o = 0; o < out; ++o) {
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += delta[o] * x[i];
      gb[o] += delta[o];
    }
    if (l == 0) break;
    next.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) next[i] += row[i] * delta[o];
    }
    delta.swap(next);
  }
}

}  // namespace htrl
