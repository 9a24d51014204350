#include "htrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "htrl/error.hpp"

namespace htrl {

PolicyParams make_policy(std::size_t n_heads, std::span<const std::size_t> hidden,
                         std::mt19937_64& rng) {
  if (n_heads == 0) throw Error("ppo", "policy needs at least one action head");
  const std::size_t in = n_heads + 2;
  std::vector<std::size_t> a{in}, c{in};
  for (std::size_t h : hidden) {
    a.push_back(h);
    c.push_back(h);
  }
  a.push_back(n_heads * kActionCount);
  c.push_back(1);
  PolicyParams p{n_heads, Mlp(a), Mlp(c)};
  // Small output gain keeps the initial policy close to uniform.
  p.actor.init(rng, std::sqrt(2.0), 0.01);
  p.critic.init(rng, std::sqrt(2.0), 1.0);
  return p;
}

void softmax_heads(std::span<const double> logits, std::span<double> probs) {
  for (std::size_t h = 0; h * kActionCount < logits.size(); ++h) {
    const double* z = logits.data() + h * kActionCount;
    double* p = probs.data() + h * kActionCount;
    const double m = *std::max_element(z, z + kActionCount);
    double sum = 0.0;
    for (std::size_t k = 0; k < kActionCount; ++k) sum += p[k] = std::exp(z[k] - m);
    for (std::size_t k = 0; k < kActionCount; ++k) p[k] /= sum;
  }
}

namespace {

// log-softmax of one head
void log_softmax(const double* z, double* out) {
  const double m = *std::max_element(z, z + kActionCount);
  double sum = 0.0;
  for (std::size_t k = 0; k < kActionCount; ++k) sum += std::exp(z[k] - m);
  const double lse = m + std::log(sum);
  for (std::size_t k = 0; k < kActionCount; ++k) out[k] = z[k] - lse;
}

}  // namespace

PolicyOutput evaluate_policy(const PolicyParams& params, std::span<const double> state) {
  PolicyOutput out;
  out.logits = params.actor.forward(state);
  out.probs.resize(out.logits.size());
  softmax_heads(out.logits, out.probs);
  out.value = params.critic.forward(state)[0];
  return out;
}

ActionSample select_action(const PolicyParams& params, std::span<const double> state,
                           std::mt19937_64& rng) {
  const PolicyOutput out = evaluate_policy(params, state);
  ActionSample s;
  s.value = out.value;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> logp(kActionCount);
  for (std::size_t h = 0; h < params.n_heads; ++h) {
    const auto p = out.head(h);
    const double r = u(rng);
    std::size_t k = 0;
    double acc = p[0];
    while (k + 1 < kActionCount && r >= acc) acc += p[++k];
    s.actions.push_back(static_cast<std::uint8_t>(k));
    log_softmax(out.logits.data() + h * kActionCount, logp.data());
    s.log_prob += logp[k];
  }
  return s;
}

std::vector<double> normalize_state(std::span<const std::uint32_t> state, double scale) {
  std::vector<double> out(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) out[i] = state[i] / scale;
  return out;
}

// ---------------------------------------------------------------------------

RolloutBuffer::RolloutBuffer(std::size_t capacity, std::size_t state_size, std::size_t n_heads)
    : capacity_(capacity), state_size_(state_size), n_heads_(n_heads) {
  states_.reserve(capacity * state_size);
  actions_.reserve(capacity * n_heads);
}

void RolloutBuffer::add(std::span<const double> state, std::span<const std::uint8_t> actions,
                        double log_prob, double reward, double value, bool done) {
  if (full()) throw Error("ppo", "rollout buffer is full");
  if (state.size() != state_size_ || actions.size() != n_heads_) {
    throw Error("ppo", "rollout entry has the wrong shape");
  }
  states_.insert(states_.end(), state.begin(), state.end());
  actions_.insert(actions_.end(), actions.begin(), actions.end());
  log_probs_.push_back(log_prob);
  rewards_.push_back(reward);
  values_.push_back(value);
  dones_.push_back(done ? 1 : 0);
}

void RolloutBuffer::clear() {
  states_.clear();
  actions_.clear();
  log_probs_.clear();
  rewards_.clear();
  values_.clear();
  dones_.clear();
}

Advantages compute_gae(const RolloutBuffer& buffer, double gamma, double lambda,
                       double last_value) {
  const std::size_t n = buffer.size();
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double gae = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double live = buffer.dones()[t] ? 0.0 : 1.0;
    const double next_value = t + 1 < n ? buffer.values()[t + 1] : last_value;
    const double delta = buffer.rewards()[t] + gamma * next_value * live - buffer.values()[t];
    gae = delta + gamma * lambda * live * gae;
    out.advantages[t] = gae;
    out.returns[t] = gae + buffer.values()[t];
  }
  return out;
}

// ---------------------------------------------------------------------------

LossTerms ppo_loss(const PolicyParams& params, const RolloutBuffer& buffer,
                   std::span<const std::size_t> idx, std::span<const double> advantages,
                   std::span<const double> returns, const PpoConfig& config,
                   std::span<double> actor_grad, std::span<double> critic_grad) {
  const std::size_t batch = idx.size();
  const std::size_t heads = params.n_heads;
  const double inv_b = 1.0 / static_cast<double>(batch);
  const bool want_grad = !actor_grad.empty();

  LossTerms terms;
  Mlp::Tape actor_tape, critic_tape;
  std::vector<double> logp(heads * kActionCount), probs(heads * kActionCount);
  std::vector<double> dlogits(heads * kActionCount), head_entropy(heads);

  for (std::size_t k = 0; k < batch; ++k) {
    const std::size_t i = idx[k];
    const auto state = buffer.state(i);
    const auto act = buffer.actions(i);

    params.actor.forward(state, actor_tape);
    const std::vector<double>& z = actor_tape.act.back();
    double new_logp = 0.0, entropy = 0.0;
    for (std::size_t h = 0; h < heads; ++h) {
      double* lp = logp.data() + h * kActionCount;
      log_softmax(z.data() + h * kActionCount, lp);
      double hh = 0.0;
      for (std::size_t a = 0; a < kActionCount; ++a) {
        probs[h * kActionCount + a] = std::exp(lp[a]);
        hh -= probs[h * kActionCount + a] * lp[a];
      }
      head_entropy[h] = hh;
      entropy += hh;
      new_logp += lp[act[h]];
    }

    const double log_ratio = new_logp - buffer.log_probs()[i];
    const double ratio = std::exp(log_ratio);
    const double adv = advantages[k];
    const double surr1 = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
    const double surr2 = clipped * adv;
    const bool unclipped = surr1 <= surr2;
    terms.policy -= std::min(surr1, surr2) * inv_b;
    terms.entropy += entropy * inv_b;
    if (std::abs(ratio - 1.0) > config.clip_epsilon) terms.clip_fraction += inv_b;
    terms.approx_kl += ((ratio - 1.0) - log_ratio) * inv_b;

    params.critic.forward(state, critic_tape);
    const double v = critic_tape.act.back()[0];
    const double err = v - returns[k];
    terms.value += err * err * inv_b;

    if (!want_grad) continue;
    // d(loss)/d(new_logp): only the unclipped branch depends on params.
    const double g_logp = unclipped ? -ratio * adv * inv_b : 0.0;
    const double g_ent = -config.entropy_coef * inv_b;
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t a = 0; a < kActionCount; ++a) {
        const std::size_t j = h * kActionCount + a;
        const double p = probs[j];
        const double d_logp = (a == act[h] ? 1.0 : 0.0) - p;
        const double d_ent = -p * (logp[j] + head_entropy[h]);
        dlogits[j] = g_logp * d_logp + g_ent * d_ent;
      }
    }
    params.actor.backward(actor_tape, dlogits, actor_grad);
    const double dv = config.value_coef * 2.0 * err * inv_b;
    params.critic.backward(critic_tape, std::span<const double>(&dv, 1), critic_grad);
  }
  terms.total = terms.policy + config.value_coef * terms.value - config.entropy_coef * terms.entropy;
  return terms;
}

Adam::Adam(std::size_t n, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

PpoLearner::PpoLearner(PolicyParams params, PpoConfig config)
    : params_(std::move(params)),
      config_(std::move(config)),
      adam_(params_.actor.param_count() + params_.critic.param_count(), config_.adam_beta1,
            config_.adam_beta2, config_.adam_eps),
      rng_(config_.seed) {
  if (config_.minibatch_size == 0) throw Error("ppo", "minibatch size must be positive");
}

UpdateStats PpoLearner::update(const RolloutBuffer& buffer, const Advantages& adv) {
  const std::size_t n = buffer.size();
  if (n == 0) throw Error("ppo", "update on an empty rollout buffer");
  const std::size_t na = params_.actor.param_count();
  const std::size_t nc = params_.critic.param_count();

  std::vector<std::size_t> order(n);
  std::vector<double> grad(na + nc), flat(na + nc), mb_adv, mb_ret;
  UpdateStats stats;

  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);
    LossTerms sum;
    std::size_t count = 0;
    for (std::size_t start = 0; start < n; start += config_.minibatch_size) {
      const std::size_t end = std::min(n, start + config_.minibatch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);

      mb_adv.resize(idx.size());
      mb_ret.resize(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) {
        mb_adv[k] = adv.advantages[idx[k]];
        mb_ret[k] = adv.returns[idx[k]];
      }
      if (idx.size() > 1) {
        const double mean = std::accumulate(mb_adv.begin(), mb_adv.end(), 0.0) / idx.size();
        double var = 0.0;
        for (double a : mb_adv) var += (a - mean) * (a - mean);
        const double sd = std::sqrt(var / static_cast<double>(idx.size() - 1));
        for (double& a : mb_adv) a = (a - mean) / (sd + 1e-8);
      }

      std::fill(grad.begin(), grad.end(), 0.0);
      const LossTerms t = ppo_loss(params_, buffer, idx, mb_adv, mb_ret, config_,
                                   std::span<double>(grad.data(), na),
                                   std::span<double>(grad.data() + na, nc));
      double norm2 = 0.0;
      for (double g : grad) norm2 += g * g;
      if (!std::isfinite(t.total) || !std::isfinite(norm2)) {
        throw Error("ppo", "non-finite loss or gradient at epoch " + std::to_string(epoch) +
                               "; update aborted");
      }
      if (config_.max_grad_norm > 0.0) {
        const double norm = std::sqrt(norm2);
        if (norm > config_.max_grad_norm) {
          const double s = config_.max_grad_norm / (norm + 1e-6);
          for (double& g : grad) g *= s;
        }
      }
      std::copy(params_.actor.params().begin(), params_.actor.params().end(), flat.begin());
      std::copy(params_.critic.params().begin(), params_.critic.params().end(), flat.begin() + na);
      adam_.step(flat, grad, config_.learning_rate);
      std::copy(flat.begin(), flat.begin() + na, params_.actor.params().begin());
      std::copy(flat.begin() + na, flat.end(), params_.critic.params().begin());

      sum.total += t.total;
      sum.policy += t.policy;
      sum.value += t.value;
      sum.entropy += t.entropy;
      sum.clip_fraction += t.clip_fraction;
      sum.approx_kl += t.approx_kl;
      ++count;
      ++stats.minibatches;
    }
    const double c = static_cast<double>(count);
    stats.last = {sum.total / c,   sum.policy / c,        sum.value / c,
                  sum.entropy / c, sum.clip_fraction / c, sum.approx_kl / c};
  }
  return stats;
}

// ---------------------------------------------------------------------------

std::uint64_t TrainSchedule::total() const {
  if (override_total) return override_total;
  const double extra = n_triggers > 2 ? n_triggers - 2 : 0;
  return static_cast<std::uint64_t>(
      std::llround(static_cast<double>(base_timesteps) * std::pow(1.0 + growth, extra)));
}

void write_metrics_header(std::ostream& os) {
  os << "timestep,mean_step_reward,mean_episode_reward,hts_found,best_icp,policy_loss,"
        "value_loss,entropy\n";
}

void write_metrics_row(std::ostream& os, const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu,%.6f,%.6f,%zu,%.6f,%.6f,%.6f,%.6f\n",
                static_cast<unsigned long long>(r.timestep), r.mean_step_reward,
                r.mean_episode_reward, r.hts_found, r.best_icp, r.policy_loss, r.value_loss,
                r.entropy);
  os << buf;
}

TrainResult train(TrojanEnv& env, const TrainSchedule& schedule, const PpoConfig& config,
                  std::ostream* metrics) {
  const std::uint64_t total = schedule.total();
  const std::size_t heads = env.config().n_triggers;
  if (config.rollout_length == 0) throw Error("ppo", "rollout length must be positive");

  std::mt19937_64 init_rng(config.seed);
  PpoConfig learner_config = config;
  learner_config.seed = init_rng();
  PpoLearner learner(make_policy(heads, config.hidden, init_rng), learner_config);

  const double scale = static_cast<double>(env.base().max_level()) + 1.0;
  std::vector<double> state = normalize_state(env.reset(), scale);
  RolloutBuffer buffer(config.rollout_length, env.state_size(), heads);
  std::vector<TriggerAction> actions(heads);

  TrainResult result;
  result.step_rewards.reserve(total);
  if (metrics) write_metrics_header(*metrics);

  double episode_return = 0.0;
  std::uint64_t t = 0;
  while (t < total) {
    buffer.clear();
    const std::size_t n = static_cast<std::size_t>(
        std::min<std::uint64_t>(config.rollout_length, total - t));
    double reward_sum = 0.0, finished_sum = 0.0;
    std::size_t finished = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const ActionSample s = select_action(learner.params(), state, learner.rng());
      for (std::size_t h = 0; h < heads; ++h) actions[h] = static_cast<TriggerAction>(s.actions[h]);
      const StepOutcome out = env.step(actions);
      result.step_rewards.push_back(out.reward);
      if (out.info.activated) result.best_icp = std::max(result.best_icp, out.info.icp);
      reward_sum += out.reward;
      episode_return += out.reward;
      buffer.add(state, s.actions, s.log_prob, out.reward, s.value, out.done);
      if (out.done) {
        finished_sum += episode_return;
        ++finished;
        episode_return = 0.0;
        state = normalize_state(env.reset(), scale);
      } else {
        state = normalize_state(out.state, scale);
      }
    }
    t += n;

    const double last_value = evaluate_policy(learner.params(), state).value;
    const Advantages adv = compute_gae(buffer, config.gamma, config.gae_lambda, last_value);
    const UpdateStats stats = learner.update(buffer, adv);

    MetricsRow row;
    row.timestep = t;
    row.mean_step_reward = reward_sum / static_cast<double>(n);
    row.mean_episode_reward =
        finished ? finished_sum / finished : std::numeric_limits<double>::quiet_NaN();
    row.hts_found = env.log().size();
    row.best_icp = result.best_icp;
    row.policy_loss = stats.last.policy;
    row.value_loss = stats.last.value;
    row.entropy = stats.last.entropy;
    result.metrics.push_back(row);
    if (metrics) write_metrics_row(*metrics, row);
  }
  result.params = learner.params();
  result.log = env.log();
  return result;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointMagic = "htrl-policy";
constexpr int kCheckpointVersion = 1;

void save_mlp(std::ostream& os, const char* tag, const Mlp& m) {
  os << tag << ' ' << m.sizes().size();
  for (std::size_t s : m.sizes()) os << ' ' << s;
  os << '\n';
  char buf[64];
  for (std::size_t i = 0; i < m.param_count(); ++i) {
    std::snprintf(buf, sizeof buf, "%a", m.params()[i]);
    os << buf << ((i + 1) % 8 == 0 || i + 1 == m.param_count() ? '\n' : ' ');
  }
}

Mlp load_mlp(std::istream& is, const char* tag) {
  std::string word;
  std::size_t count = 0;
  if (!(is >> word >> count) || word != tag || count < 2 || count > 64) {
    throw Error("ppo", std::string("checkpoint: expected '") + tag + "' layer header");
  }
  std::vector<std::size_t> sizes(count);
  for (auto& s : sizes) {
    if (!(is >> s) || s == 0 || s > 1'000'000) throw Error("ppo", "checkpoint: bad layer size");
  }
  Mlp m(sizes);
  for (double& p : m.params()) {
    // Hex floats are read with strtod; stream extraction does not accept them.
    if (!(is >> word)) throw Error("ppo", "checkpoint: truncated parameters");
    char* end = nullptr;
    p = std::strtod(word.c_str(), &end);
    if (end != word.c_str() + word.size()) throw Error("ppo", "checkpoint: bad number '" + word + "'");
  }
  return m;
}

}  // namespace

void save_policy(std::ostream& os, const PolicyParams& params) {
  os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  os << "heads " << params.n_heads << '\n';
  save_mlp(os, "actor", params.actor);
  save_mlp(os, "critic", params.critic);
}

PolicyParams load_policy(std::istream& is) {
  std::string magic, word;
  int version = 0;
  if (!(is >> magic >> version) || magic != kCheckpointMagic) {
    throw Error("ppo", "not a policy checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw Error("ppo", "unsupported checkpoint version " + std::to_string(version));
  }
  PolicyParams p;
  if (!(is >> word >> p.n_heads) || word != "heads") throw Error("ppo", "checkpoint: missing heads");
  p.actor = load_mlp(is, "actor");
  p.critic = load_mlp(is, "critic");
  if (p.actor.output_size() != p.n_heads * kActionCount || p.critic.output_size() != 1 ||
      p.actor.input_size() != p.critic.input_size()) {
    throw Error("ppo", "checkpoint: network shapes do not match the header");
  }
  return p;
}

}  // namespace htrl
