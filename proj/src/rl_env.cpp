#include "htrl/rl_env.hpp"

#include <algorithm>
#include <cmath>

namespace htrl {
namespace {

std::string placement_key(const Placement& p) {
  std::vector<NetId> sorted = p.triggers;
  std::sort(sorted.begin(), sorted.end());
  std::string key;
  for (NetId t : sorted) key += std::to_string(t) + ",";
  return key + ">" + std::to_string(p.target);
}

}  // namespace

std::string_view to_string(TriggerAction a) {
  switch (a) {
    case TriggerAction::NextLevel: return "next_level";
    case TriggerAction::PrevLevel: return "prev_level";
    case TriggerAction::SameLevelUp: return "same_level_up";
    case TriggerAction::SameLevelDown: return "same_level_down";
    case TriggerAction::NoAction: return "no_action";
  }
  return "?";
}

std::uint32_t default_steps_per_episode(std::uint32_t n_triggers, std::uint32_t base,
                                        double growth) {
  const double extra = n_triggers > 2 ? n_triggers - 2 : 0;
  return static_cast<std::uint32_t>(std::llround(base * std::pow(1.0 + growth, extra)));
}

TrojanEnv::TrojanEnv(Circuit base, EnvConfig config)
    : TrojanEnv(base, config, select_suspicious(base, compute_scoap(base), config.suspicious_fraction)) {}

TrojanEnv::TrojanEnv(Circuit base, EnvConfig config, SuspiciousSet suspicious)
    : base_(std::move(base)),
      config_(config),
      scoap_(compute_scoap(base_)),
      suspicious_(std::move(suspicious)),
      cones_(base_),
      steps_per_episode_(config.steps_per_episode ? config.steps_per_episode
                                                  : default_steps_per_episode(config.n_triggers)),
      rng_(config.seed) {
  if (config_.n_triggers < 2) throw Error("env", "n_triggers must be at least 2");
}

std::vector<std::uint32_t> TrojanEnv::reset() {
  if (ready_) ++episode_;
  placement_ = sample_placement(base_, cones_, config_.n_triggers, rng_);
  step_ = 0;
  rebuild();
  ready_ = true;
  return state_;
}

void TrojanEnv::place(std::vector<NetId> triggers, NetId target) {
  if (triggers.size() != config_.n_triggers) {
    throw Error("env", "expected " + std::to_string(config_.n_triggers) + " triggers");
  }
  Placement p{std::move(triggers), target};
  if (auto violation = check_placement(base_, cones_, p.triggers, p.target)) throw *violation;
  placement_ = std::move(p);
  rebuild();
  ready_ = true;
}

void TrojanEnv::rebuild() {
  current_ = insert(base_, cones_, placement_.triggers, placement_.target);
  const Circuit& c = current_.circuit;
  state_.clear();
  for (NetId t : current_.instance.triggers) state_.push_back(c.net(t).level);
  state_.push_back(c.net(current_.instance.target).level);
  state_.push_back(c.net(current_.instance.payload_output).level);
}

bool TrojanEnv::valid_move(std::size_t index, NetId candidate) const {
  const NetId target = placement_.target;
  if (candidate == target || base_.net(candidate).level >= base_.net(target).level) return false;
  if (cones_.reaches(candidate, target)) return false;
  for (std::size_t j = 0; j < placement_.triggers.size(); ++j) {
    if (j == index) continue;
    const NetId other = placement_.triggers[j];
    if (other == candidate || cones_.related(other, candidate)) return false;
  }
  return true;
}

NetId TrojanEnv::apply_trigger_action(std::size_t index, TriggerAction action) {
  if (index >= placement_.triggers.size()) throw Error("env", "trigger index out of range");
  NetId& trig = placement_.triggers[index];
  const std::uint32_t level = base_.net(trig).level;

  switch (action) {
    case TriggerAction::NextLevel:
    case TriggerAction::PrevLevel: {
      if (action == TriggerAction::PrevLevel && level == 0) break;
      const std::uint32_t to = action == TriggerAction::NextLevel ? level + 1 : level - 1;
      std::vector<NetId> options;
      for (NetId c : base_.nets_at_level(to)) {
        if (valid_move(index, c)) options.push_back(c);
      }
      if (!options.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
        trig = options[pick(rng_)];
      }
      break;
    }
    case TriggerAction::SameLevelUp: {
      const auto row = base_.nets_at_level(level);
      auto it = std::upper_bound(row.begin(), row.end(), trig);
      for (; it != row.end(); ++it) {
        if (valid_move(index, *it)) {
          trig = *it;
          break;
        }
      }
      break;
    }
    case TriggerAction::SameLevelDown: {
      const auto row = base_.nets_at_level(level);
      auto it = std::lower_bound(row.begin(), row.end(), trig);
      while (it != row.begin()) {
        --it;
        if (valid_move(index, *it)) {
          trig = *it;
          break;
        }
      }
      break;
    }
    case TriggerAction::NoAction: break;
  }
  return trig;
}

const TrojanEnv::Verdict& TrojanEnv::activation() {
  const std::string key = placement_key(placement_);
  auto it = verdicts_.find(key);
  if (it != verdicts_.end()) return it->second;

  const Circuit& c = current_.circuit;
  const TestResult r = check_activation(c, current_.instance, compute_scoap(c),
                                        config_.podem_backtrack_limit);
  Verdict v{r.status, r.detected() ? icp(r, c) : 0.0, r.input_stack, {}};
  for (const auto& [pi, value] : r.input_stack) v.named_stack.emplace_back(c.net(pi).name, value);
  std::stable_sort(v.named_stack.begin(), v.named_stack.end(), [&](const auto& a, const auto& b) {
    return c.input_index(c.at(a.first)) < c.input_index(c.at(b.first));
  });
  return verdicts_.emplace(key, std::move(v)).first->second;
}

StepInfo TrojanEnv::evaluate(double* reward) {
  if (!ready_) throw Error("env", "environment used before reset()");
  StepInfo info;
  info.placement = placement_;
  info.suspicious = std::any_of(placement_.triggers.begin(), placement_.triggers.end(),
                                [&](NetId t) { return suspicious_.contains(t); });
  if (!info.suspicious) {
    *reward = kNotSuspiciousReward;
    return info;
  }
  const Verdict& v = activation();
  info.status = v.status;
  info.activated = v.status == TestStatus::Detected;
  info.icp = v.icp;
  *reward = info.activated ? kRewardScale * v.icp : 0.0;
  return info;
}

StepOutcome TrojanEnv::step(std::span<const TriggerAction> actions) {
  if (!ready_) throw Error("env", "environment used before reset()");
  if (actions.size() != config_.n_triggers) {
    throw Error("env", "expected " + std::to_string(config_.n_triggers) + " actions");
  }
  for (std::size_t i = 0; i < actions.size(); ++i) apply_trigger_action(i, actions[i]);
  rebuild();
  ++step_;

  StepOutcome out;
  out.info = evaluate(&out.reward);
  out.state = state_;
  out.done = step_ >= steps_per_episode_;

  if (out.info.activated) {
    TrojanRecord rec;
    rec.circuit = base_.name();
    for (NetId t : placement_.triggers) rec.triggers.push_back(base_.net(t).name);
    rec.target = base_.net(placement_.target).name;
    rec.icp = out.info.icp;
    rec.input_stack = verdicts_.at(placement_key(placement_)).named_stack;
    rec.episode = episode_;
    rec.step = step_;
    rec.seed = config_.seed;
    log_.add(std::move(rec));
  }
  return out;
}

}  // namespace htrl
