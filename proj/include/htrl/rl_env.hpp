#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "htrl/circuit.hpp"
#include "htrl/scoap.hpp"
#include "htrl/trojan.hpp"

namespace htrl {

// Per-trigger move. The numeric values index the policy's action heads.
enum class TriggerAction : std::uint8_t {
  NextLevel,
  PrevLevel,
  SameLevelUp,
  SameLevelDown,
  NoAction,
};

inline constexpr std::size_t kActionCount = 5;

std::string_view to_string(TriggerAction a);

inline constexpr double kRewardScale = 20.0;
inline constexpr double kNotSuspiciousReward = -1.0;

// Steps per episode: `base` for two triggers, grown by `growth` (compounded)
// for every extra trigger input.
std::uint32_t default_steps_per_episode(std::uint32_t n_triggers, std::uint32_t base = 100,
                                        double growth = 0.10);

struct EnvConfig {
  std::uint32_t n_triggers = 2;
  std::uint32_t steps_per_episode = 0;  // 0 selects default_steps_per_episode()
  double suspicious_fraction = 0.05;
  std::uint64_t seed = 0;
  std::uint64_t podem_backtrack_limit = kDefaultBacktrackLimit;
};

struct StepInfo {
  bool suspicious = false;  // some trigger is a suspicious net
  bool activated = false;
  double icp = 0.0;
  TestStatus status = TestStatus::Untestable;
  Placement placement;  // base-circuit net ids
};

struct StepOutcome {
  std::vector<std::uint32_t> state;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// Episodic Trojan-insertion environment over an immutable base circuit.
//
// State: levels of the trigger nets, the target and the payload output in the
// infected circuit. The target is drawn on reset and kept for the episode;
// each step moves the triggers, rebuilds the Trojan and scores it.
class TrojanEnv {
 public:
  TrojanEnv(Circuit base, EnvConfig config);
  // Uses `suspicious` instead of the quantile selection.
  TrojanEnv(Circuit base, EnvConfig config, SuspiciousSet suspicious);

  std::vector<std::uint32_t> reset();

  // Moves trigger `index` and returns its new base-circuit net. Moves with no
  // rule-abiding destination leave the trigger where it is.
  NetId apply_trigger_action(std::size_t index, TriggerAction action);

  StepOutcome step(std::span<const TriggerAction> actions);

  // Places the Trojan directly (rules are checked). Keeps episode and step
  // counters; used to replay or construct specific configurations.
  void place(std::vector<NetId> triggers, NetId target);

  // Reward and activation info for the current placement, without advancing.
  StepInfo evaluate(double* reward);

  const std::vector<std::uint32_t>& state() const { return state_; }
  const Circuit& base() const { return base_; }
  const Circuit& infected() const { return current_.circuit; }
  const TrojanInstance& instance() const { return current_.instance; }
  const Placement& placement() const { return placement_; }
  const ScoapTable& scoap() const { return scoap_; }
  const SuspiciousSet& suspicious() const { return suspicious_; }
  const ConeIndex& cones() const { return cones_; }
  const TrojanLog& log() const { return log_; }
  const EnvConfig& config() const { return config_; }
  std::uint32_t steps_per_episode() const { return steps_per_episode_; }
  std::uint64_t episode() const { return episode_; }
  std::uint32_t step_count() const { return step_; }
  std::size_t state_size() const { return config_.n_triggers + 2; }

 private:
  struct Verdict {
    TestStatus status;
    double icp;
    Assignment input_stack;  // infected-circuit ids
    std::vector<std::pair<std::string, bool>> named_stack;
  };

  bool valid_move(std::size_t index, NetId candidate) const;
  void rebuild();
  const Verdict& activation();

  Circuit base_;
  EnvConfig config_;
  ScoapTable scoap_;
  SuspiciousSet suspicious_;
  ConeIndex cones_;
  std::uint32_t steps_per_episode_;
  std::mt19937_64 rng_;

  Placement placement_;
  Insertion current_;
  std::vector<std::uint32_t> state_;
  bool ready_ = false;
  std::uint64_t episode_ = 0;
  std::uint32_t step_ = 0;

  std::map<std::string, Verdict> verdicts_;  // keyed by sorted triggers + target
  TrojanLog log_;
};

}  // namespace htrl
