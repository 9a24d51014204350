#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "htrl/error.hpp"
#include "htrl/ppo.hpp"
#include "support.hpp"

using namespace htrl;
using namespace htrl::test;

namespace {

// Forward pass written out from the documented parameter layout.
std::vector<double> plain_forward(const Mlp& m, const std::vector<double>& x) {
  std::vector<double> a = x;
  std::size_t off = 0;
  const auto& sz = m.sizes();
  for (std::size_t l = 0; l + 1 < sz.size(); ++l) {
    std::vector<double> b(sz[l + 1]);
    for (std::size_t o = 0; o < sz[l + 1]; ++o) {
      double s = m.params()[off + sz[l + 1] * sz[l] + o];
      for (std::size_t i = 0; i < sz[l]; ++i) s += m.params()[off + o * sz[l] + i] * a[i];
      b[o] = l + 2 < sz.size() ? std::tanh(s) : s;
    }
    off += sz[l + 1] * sz[l] + sz[l + 1];
    a = std::move(b);
  }
  return a;
}

struct Batch {
  RolloutBuffer buffer;
  std::vector<std::size_t> idx;
  std::vector<double> adv, ret;
};

// Old log-probs are offset from the current policy so that some ratios sit
// inside the clip range and some well outside it.
Batch make_batch(const PolicyParams& p, std::size_t n, std::mt19937_64& rng) {
  const double offsets[] = {-0.5, -0.1, 0.05, 0.3};
  Batch b{RolloutBuffer(n, p.state_size(), p.n_heads), {}, {}, {}};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> s(p.state_size());
    for (double& x : s) x = u(rng);
    const ActionSample a = select_action(p, s, rng);
    b.buffer.add(s, a.actions, a.log_prob + offsets[t % 4], g(rng), a.value, false);
    b.idx.push_back(t);
    b.adv.push_back(g(rng));
    b.ret.push_back(g(rng));
  }
  return b;
}

double plain_loss(const PolicyParams& p, const Batch& b, const PpoConfig& cfg) {
  double pol = 0, val = 0, ent = 0;
  const double n = double(b.idx.size());
  for (std::size_t k = 0; k < b.idx.size(); ++k) {
    const std::size_t i = b.idx[k];
    const std::vector<double> s(b.buffer.state(i).begin(), b.buffer.state(i).end());
    const std::vector<double> z = plain_forward(p.actor, s);
    double logp = 0;
    for (std::size_t h = 0; h < p.n_heads; ++h) {
      double sum = 0;
      for (std::size_t a = 0; a < kActionCount; ++a) sum += std::exp(z[h * kActionCount + a]);
      for (std::size_t a = 0; a < kActionCount; ++a) {
        const double q = std::exp(z[h * kActionCount + a]) / sum;
        ent -= q * std::log(q) / n;
      }
      logp += z[h * kActionCount + b.buffer.actions(i)[h]] - std::log(sum);
    }
    const double r = std::exp(logp - b.buffer.log_probs()[i]);
    const double rc = std::min(std::max(r, 1 - cfg.clip_epsilon), 1 + cfg.clip_epsilon);
    pol -= std::min(r * b.adv[k], rc * b.adv[k]) / n;
    const double v = plain_forward(p.critic, s)[0];
    val += (v - b.ret[k]) * (v - b.ret[k]) / n;
  }
  return pol + cfg.value_coef * val - cfg.entropy_coef * ent;
}

void check_gradient(const std::vector<std::size_t>& hidden, std::size_t heads, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PolicyParams p = make_policy(heads, hidden, rng);
  // Larger output weights than the default init so the policy is far from uniform.
  for (double& w : p.actor.params()) w *= 20.0;
  PpoConfig cfg;
  cfg.entropy_coef = 0.05;
  const Batch b = make_batch(p, 12, rng);

  std::vector<double> ga(p.actor.param_count()), gc(p.critic.param_count());
  const LossTerms t = ppo_loss(p, b.buffer, b.idx, b.adv, b.ret, cfg, ga, gc);
  CHECK(std::abs(t.total - plain_loss(p, b, cfg)) < 1e-12);
  CHECK(t.clip_fraction > 0.0);
  CHECK(t.clip_fraction < 1.0);

  auto numeric = [&](std::vector<double>& w, std::size_t j) {
    const double h = 1e-6, keep = w[j];
    w[j] = keep + h;
    const double up = plain_loss(p, b, cfg);
    w[j] = keep - h;
    const double down = plain_loss(p, b, cfg);
    w[j] = keep;
    return (up - down) / (2 * h);
  };
  double worst = 0;
  for (std::size_t j = 0; j < ga.size(); ++j) {
    const double n = numeric(p.actor.params(), j);
    worst = std::max(worst, std::abs(n - ga[j]) / std::max(1e-3, std::abs(n) + std::abs(ga[j])));
  }
  for (std::size_t j = 0; j < gc.size(); ++j) {
    const double n = numeric(p.critic.params(), j);
    worst = std::max(worst, std::abs(n - gc[j]) / std::max(1e-3, std::abs(n) + std::abs(gc[j])));
  }
  CHECK(worst < 1e-4);
}

PpoConfig small_config() {
  PpoConfig c;
  c.hidden = {16, 16};
  c.rollout_length = 128;
  c.epochs = 3;
  c.minibatch_size = 32;
  return c;
}

}  // namespace

TEST_CASE("network forward matches the documented layout") {
  std::mt19937_64 rng(1);
  const PolicyParams p = make_policy(3, std::vector<std::size_t>{64, 64}, rng);
  CHECK(p.state_size() == 5);
  CHECK(p.actor.output_size() == 15);
  CHECK(p.critic.output_size() == 1);
  CHECK(p.actor.param_count() == 5 * 64 + 64 + 64 * 64 + 64 + 64 * 15 + 15);
  const std::vector<double> x{0.1, 0.4, 0.2, 0.9, 1.0};
  const auto a = p.actor.forward(x), want = plain_forward(p.actor, x);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - want[i]) < 1e-12);
  CHECK(std::abs(p.critic.forward(x)[0] - plain_forward(p.critic, x)[0]) < 1e-12);
  // Small actor head: the initial policy is near uniform.
  const PolicyOutput out = evaluate_policy(p, x);
  for (double q : out.probs) CHECK(std::abs(q - 0.2) < 0.02);
  CHECK_THROWS_AS(p.actor.forward(std::vector<double>{1.0}), Error);
}

TEST_CASE("analytic loss gradient matches central differences") {
  check_gradient({8, 8}, 2, 11);
  check_gradient({16}, 3, 12);
  // No hidden layer: logits are affine in the state.
  check_gradient({}, 1, 13);
}

TEST_CASE("clipped samples contribute no policy gradient") {
  std::mt19937_64 rng(3);
  const PolicyParams p = make_policy(2, std::vector<std::size_t>{8}, rng);
  PpoConfig cfg;
  cfg.entropy_coef = 0.0;
  Batch b = make_batch(p, 8, rng);
  // Recreate the buffer with old log-probs far below the current ones and positive advantages.
  RolloutBuffer buf(8, p.state_size(), 2);
  for (std::size_t t = 0; t < 8; ++t) {
    const auto s = b.buffer.state(t);
    const ActionSample a = select_action(p, s, rng);
    buf.add(s, a.actions, a.log_prob - 2.0, 0, 0, false);
    b.adv[t] = 1.0 + t;
  }
  std::vector<double> ga(p.actor.param_count()), gc(p.critic.param_count());
  const LossTerms t = ppo_loss(p, buf, b.idx, b.adv, b.ret, cfg, ga, gc);
  CHECK(t.clip_fraction == 1.0);
  for (double g : ga) CHECK(g == 0.0);
  // Surrogate is the clipped value (1 + eps) * A.
  CHECK(std::abs(t.policy + 1.2 * 4.5) < 1e-12);
}

TEST_CASE("at ratio one the clipped and unclipped objectives agree") {
  std::mt19937_64 rng(4);
  const PolicyParams p = make_policy(2, std::vector<std::size_t>{8}, rng);
  RolloutBuffer buf(20, p.state_size(), 2);
  std::vector<std::size_t> idx;
  std::vector<double> adv, ret;
  std::normal_distribution<double> g;
  for (std::size_t t = 0; t < 20; ++t) {
    const std::vector<double> s{g(rng), g(rng), g(rng), g(rng)};
    const ActionSample a = select_action(p, s, rng);
    buf.add(s, a.actions, a.log_prob, 0, 0, false);
    idx.push_back(t);
    adv.push_back(g(rng));
    ret.push_back(0);
  }
  PpoConfig cfg;
  const LossTerms t = ppo_loss(p, buf, idx, adv, ret, cfg, {}, {});
  CHECK(std::abs(t.policy + std::accumulate(adv.begin(), adv.end(), 0.0) / 20) < 1e-12);
  CHECK(t.clip_fraction == 0.0);
  CHECK(std::abs(t.approx_kl) < 1e-12);
}

TEST_CASE("GAE matches the forward discounted sum") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    RolloutBuffer buf(n, 1, 1);
    for (std::size_t t = 0; t < n; ++t) {
      const double s = 0;
      const std::uint8_t a = 0;
      buf.add(std::span(&s, 1), std::span(&a, 1), 0, g(rng), g(rng), rng() % 7 == 0);
    }
    const double gamma = trial % 4 == 0 ? 0.0 : 0.99, lambda = 0.95, last = g(rng);
    const Advantages adv = compute_gae(buf, gamma, lambda, last);
    const auto& r = buf.rewards();
    const auto& v = buf.values();
    const auto& d = buf.dones();
    for (std::size_t t = 0; t < n; ++t) {
      double want = 0, w = 1;
      for (std::size_t k = t; k < n; ++k) {
        const double next = d[k] ? 0.0 : (k + 1 < n ? v[k + 1] : last);
        want += w * (r[k] + gamma * next - v[k]);
        if (d[k]) break;
        w *= gamma * lambda;
      }
      CHECK(std::abs(adv.advantages[t] - want) < 1e-10);
      CHECK(std::abs(adv.returns[t] - (want + v[t])) < 1e-12);
      if (gamma == 0.0) CHECK(std::abs(adv.advantages[t] - (r[t] - v[t])) < 1e-12);
    }
  }
}

TEST_CASE("GAE with lambda one gives discounted Monte Carlo returns") {
  RolloutBuffer buf(4, 1, 1);
  const double s = 0;
  const std::uint8_t a = 0;
  const double rewards[] = {1, 2, 3, 4};
  for (int t = 0; t < 4; ++t) buf.add(std::span(&s, 1), std::span(&a, 1), 0, rewards[t], 0.5, t == 3);
  const Advantages adv = compute_gae(buf, 0.5, 1.0, 100.0);
  CHECK(std::abs(adv.returns[0] - (1 + 0.5 * 2 + 0.25 * 3 + 0.125 * 4)) < 1e-12);
  CHECK(std::abs(adv.returns[3] - 4.0) < 1e-12);
}

TEST_CASE("action sampling follows the head distributions") {
  std::mt19937_64 rng(6);
  PolicyParams p = make_policy(2, std::vector<std::size_t>{8}, rng);
  std::fill(p.actor.params().begin(), p.actor.params().end(), 0.0);
  const std::vector<double> s{0.3, 0.1, 0.5, 0.7};
  const int n = 50000;
  std::vector<int> count(kActionCount);
  for (int k = 0; k < n; ++k) {
    const ActionSample a = select_action(p, s, rng);
    REQUIRE(a.actions.size() == 2);
    ++count[a.actions[0]];
    CHECK(std::abs(a.log_prob - 2 * std::log(0.2)) < 1e-12);
  }
  const double sigma = std::sqrt(n * 0.2 * 0.8);
  for (int c : count) CHECK(std::abs(c - n * 0.2) < 4 * sigma);

  // Saturate head 1 on action 3 through its output bias.
  const std::size_t bias = p.actor.param_count() - 2 * kActionCount;
  p.actor.params()[bias + kActionCount + 3] = 40.0;
  int hit = 0;
  for (int k = 0; k < 2000; ++k) hit += select_action(p, s, rng).actions[1] == 3;
  CHECK(hit >= 1999);
}

TEST_CASE("Adam first step moves each parameter by the learning rate") {
  Adam adam(3, 0.9, 0.999, 1e-8);
  std::vector<double> w{1.0, 2.0, 3.0};
  const std::vector<double> g{0.5, -2.0, 0.0};
  adam.step(w, g, 0.1);
  CHECK(std::abs(w[0] - (1.0 - 0.1 * 0.5 / (0.5 + 1e-8))) < 1e-15);
  CHECK(std::abs(w[1] - (2.0 + 0.1 * 2.0 / (2.0 + 1e-8))) < 1e-15);
  CHECK(w[2] == 3.0);
  CHECK(adam.steps() == 1);
}

TEST_CASE("updates keep heads on the simplex and a zero learning rate changes nothing") {
  std::mt19937_64 rng(7);
  PpoConfig cfg = small_config();
  const PolicyParams p0 = make_policy(3, cfg.hidden, rng);
  Batch b = make_batch(p0, 128, rng);
  const Advantages adv = compute_gae(b.buffer, cfg.gamma, cfg.gae_lambda, 0.0);

  PpoConfig frozen = cfg;
  frozen.learning_rate = 0.0;
  PpoLearner still(p0, frozen);
  still.update(b.buffer, adv);
  CHECK(still.params() == p0);

  PpoLearner learner(p0, cfg);
  for (int k = 0; k < 5; ++k) {
    const UpdateStats st = learner.update(b.buffer, adv);
    CHECK(st.minibatches == 3 * 4);
    CHECK(st.last.entropy <= 3 * std::log(5.0) + 1e-12);
    CHECK(st.last.entropy > 0.0);
  }
  CHECK_FALSE(learner.params() == p0);
  for (std::size_t t = 0; t < 20; ++t) {
    const PolicyOutput out = evaluate_policy(learner.params(), b.buffer.state(t));
    for (std::size_t h = 0; h < 3; ++h) {
      double sum = 0;
      for (double q : out.head(h)) {
        CHECK(q >= 0.0);
        sum += q;
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("PPO learns a one-step bandit") {
  std::mt19937_64 rng(8);
  PpoConfig cfg = small_config();
  cfg.learning_rate = 3e-3;
  PpoLearner learner(make_policy(1, cfg.hidden, rng), cfg);
  const std::vector<double> s{0.5, 0.5, 0.5};
  for (int iter = 0; iter < 30; ++iter) {
    RolloutBuffer buf(128, 3, 1);
    for (int k = 0; k < 128; ++k) {
      const ActionSample a = select_action(learner.params(), s, rng);
      buf.add(s, a.actions, a.log_prob, a.actions[0] == 2 ? 1.0 : 0.0, a.value, true);
    }
    learner.update(buf, compute_gae(buf, cfg.gamma, cfg.gae_lambda, 0.0));
  }
  CHECK(evaluate_policy(learner.params(), s).probs[2] > 0.9);
}

TEST_CASE("non-finite data aborts the update") {
  std::mt19937_64 rng(9);
  PpoConfig cfg = small_config();
  const PolicyParams p = make_policy(2, cfg.hidden, rng);
  Batch b = make_batch(p, 64, rng);
  Advantages adv = compute_gae(b.buffer, cfg.gamma, cfg.gae_lambda, 0.0);
  adv.returns[5] = std::numeric_limits<double>::infinity();
  PpoLearner learner(p, cfg);
  CHECK_THROWS_AS(learner.update(b.buffer, adv), Error);
}

TEST_CASE("rollout buffer guards its capacity and shapes") {
  RolloutBuffer buf(2, 3, 2);
  const std::vector<double> s{0, 0, 0};
  const std::vector<std::uint8_t> a{0, 1};
  buf.add(s, a, 0, 0, 0, false);
  CHECK_THROWS_AS(buf.add(std::vector<double>{0}, a, 0, 0, 0, false), Error);
  buf.add(s, a, 0, 0, 0, true);
  CHECK(buf.full());
  CHECK_THROWS_AS(buf.add(s, a, 0, 0, 0, false), Error);
  buf.clear();
  CHECK(buf.size() == 0);
}

TEST_CASE("training budget grows ten percent per extra trigger") {
  TrainSchedule s;
  const std::uint64_t want[] = {120000, 132000, 145200, 159720};
  for (std::uint32_t n = 2; n <= 5; ++n) {
    s.n_triggers = n;
    CHECK(s.total() == want[n - 2]);
  }
  s.override_total = 77;
  CHECK(s.total() == 77);
}

TEST_CASE("policy checkpoints round trip exactly") {
  std::mt19937_64 rng(10);
  const PolicyParams p = make_policy(4, std::vector<std::size_t>{64, 64}, rng);
  std::stringstream ss;
  save_policy(ss, p);
  const PolicyParams q = load_policy(ss);
  CHECK(q == p);
  std::stringstream bad("htrl-policy 2\n");
  CHECK_THROWS_AS(load_policy(bad), Error);
  std::stringstream junk("hello");
  CHECK_THROWS_AS(load_policy(junk), Error);
  std::string text;
  {
    std::stringstream s2;
    save_policy(s2, p);
    text = s2.str();
  }
  std::stringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(load_policy(truncated), Error);
}

TEST_CASE("training is deterministic and spends exactly the budget") {
  const Circuit c = load_circuit(data_path("iscas85/c432.bench"));
  PpoConfig cfg = small_config();
  cfg.seed = 3;
  TrainSchedule sched;
  sched.override_total = 300;
  auto run = [&](std::ostream* metrics) {
    TrojanEnv env(c, EnvConfig{2, 40, 0.05, 5});
    return train(env, sched, cfg, metrics);
  };
  std::stringstream m1, m2;
  const TrainResult a = run(&m1), b = run(&m2);
  CHECK(a.step_rewards.size() == 300);
  CHECK(a.step_rewards == b.step_rewards);
  CHECK(a.params == b.params);
  CHECK(m1.str() == m2.str());
  REQUIRE(a.metrics.size() == 3);
  CHECK(a.metrics.back().timestep == 300);
  CHECK(a.log.size() == b.log.size());
  CHECK(a.metrics.back().hts_found == a.log.size());
  // Header plus one line per rollout.
  const std::string csv = m1.str();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind("timestep,mean_step_reward,mean_episode_reward,hts_found,best_icp,", 0) == 0);
  double best = 0;
  for (const TrojanRecord& r : a.log.records()) best = std::max(best, r.icp);
  CHECK(a.best_icp == best);

  cfg.seed = 4;
  TrojanEnv env(c, EnvConfig{2, 40, 0.05, 5});
  CHECK_FALSE(train(env, sched, cfg).params == a.params);
}
