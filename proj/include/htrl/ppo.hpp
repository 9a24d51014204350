#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "htrl/mlp.hpp"
#include "htrl/rl_env.hpp"

namespace htrl {

struct PpoConfig {
  std::vector<std::size_t> hidden{64, 64};
  double learning_rate = 3e-4;
  double clip_epsilon = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  std::size_t rollout_length = 2048;
  std::size_t epochs = 10;
  std::size_t minibatch_size = 64;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-5;
  std::uint64_t seed = 0;
};

// Actor (n_heads x kActionCount logits) and critic (scalar) networks.
struct PolicyParams {
  std::size_t n_heads = 0;
  Mlp actor;
  Mlp critic;

  std::size_t state_size() const { return actor.input_size(); }
  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

PolicyParams make_policy(std::size_t n_heads, std::span<const std::size_t> hidden,
                         std::mt19937_64& rng);

struct PolicyOutput {
  std::vector<double> logits;  // n_heads * kActionCount
  std::vector<double> probs;
  double value = 0.0;

  std::span<const double> head(std::size_t h) const {
    return std::span<const double>(probs).subspan(h * kActionCount, kActionCount);
  }
};

PolicyOutput evaluate_policy(const PolicyParams& params, std::span<const double> state);

struct ActionSample {
  std::vector<std::uint8_t> actions;
  double log_prob = 0.0;  // joint: sum over heads
  double value = 0.0;
};

ActionSample select_action(const PolicyParams& params, std::span<const double> state,
                           std::mt19937_64& rng);

// Numerically stable per-head softmax.
void softmax_heads(std::span<const double> logits, std::span<double> probs);

// Levels scaled into [0, 1].
std::vector<double> normalize_state(std::span<const std::uint32_t> state, double scale);

class RolloutBuffer {
 public:
  RolloutBuffer(std::size_t capacity, std::size_t state_size, std::size_t n_heads);

  // `done` marks the last step of an episode.
  void add(std::span<const double> state, std::span<const std::uint8_t> actions, double log_prob,
           double reward, double value, bool done);
  void clear();

  std::size_t size() const { return rewards_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return size() == capacity_; }
  std::size_t state_size() const { return state_size_; }
  std::size_t n_heads() const { return n_heads_; }

  std::span<const double> state(std::size_t t) const {
    return std::span<const double>(states_).subspan(t * state_size_, state_size_);
  }
  std::span<const std::uint8_t> actions(std::size_t t) const {
    return std::span<const std::uint8_t>(actions_).subspan(t * n_heads_, n_heads_);
  }
  const std::vector<double>& log_probs() const { return log_probs_; }
  const std::vector<double>& rewards() const { return rewards_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<std::uint8_t>& dones() const { return dones_; }

 private:
  std::size_t capacity_, state_size_, n_heads_;
  std::vector<double> states_;
  std::vector<std::uint8_t> actions_;
  std::vector<double> log_probs_, rewards_, values_;
  std::vector<std::uint8_t> dones_;
};

struct Advantages {
  std::vector<double> advantages;  // raw; update() normalizes per minibatch
  std::vector<double> returns;     // advantages + values
};

// `last_value` bootstraps the step after the buffer's final entry unless
// that entry ends an episode.
Advantages compute_gae(const RolloutBuffer& buffer, double gamma, double lambda,
                       double last_value);

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;   // negated clipped surrogate
  double value = 0.0;    // mean squared error
  double entropy = 0.0;  // mean summed head entropy
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Loss over the samples `idx` with the given (already normalized) advantages.
// Adds the gradient into actor_grad / critic_grad when they are non-empty.
LossTerms ppo_loss(const PolicyParams& params, const RolloutBuffer& buffer,
                   std::span<const std::size_t> idx, std::span<const double> advantages,
                   std::span<const double> returns, const PpoConfig& config,
                   std::span<double> actor_grad, std::span<double> critic_grad);

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double beta1, double beta2, double eps);
  void step(std::span<double> params, std::span<const double> grad, double lr);
  std::uint64_t steps() const { return t_; }

 private:
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

struct UpdateStats {
  LossTerms last;  // averaged over all minibatches of the final epoch
  std::size_t minibatches = 0;
};

class PpoLearner {
 public:
  PpoLearner(PolicyParams params, PpoConfig config);

  // Clipped-surrogate update over the buffer. Throws Error("ppo") if a loss
  // or gradient turns non-finite; params are left at the last finite state.
  UpdateStats update(const RolloutBuffer& buffer, const Advantages& adv);

  const PolicyParams& params() const { return params_; }
  PolicyParams& params() { return params_; }
  const PpoConfig& config() const { return config_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  PolicyParams params_;
  PpoConfig config_;
  Adam adam_;
  std::mt19937_64 rng_;
};

struct TrainSchedule {
  std::uint64_t base_timesteps = 120000;
  double growth = 0.10;
  std::uint32_t n_triggers = 2;
  std::uint64_t override_total = 0;  // nonzero replaces the formula

  std::uint64_t total() const;
};

struct MetricsRow {
  std::uint64_t timestep = 0;
  double mean_step_reward = 0.0;
  double mean_episode_reward = 0.0;  // NaN when no episode finished in the rollout
  std::size_t hts_found = 0;
  double best_icp = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);

struct TrainResult {
  PolicyParams params;
  TrojanLog log;
  std::vector<double> step_rewards;
  std::vector<MetricsRow> metrics;
  double best_icp = 0.0;
};

// Rollout/update loop until schedule.total() environment steps are consumed.
// The learner is seeded from config.seed; the environment keeps its own seed.
TrainResult train(TrojanEnv& env, const TrainSchedule& schedule, const PpoConfig& config,
                  std::ostream* metrics = nullptr);

void save_policy(std::ostream& os, const PolicyParams& params);
PolicyParams load_policy(std::istream& is);

}  // namespace htrl
