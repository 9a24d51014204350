#include <algorithm>
#include <queue>

#include "htrl/atpg.hpp"
#include "htrl/error.hpp"

namespace htrl {
namespace {

// Three-valued component: 0, 1 or 2 for unknown.
constexpr std::uint8_t kU = 2;

std::uint8_t good_of(Logic5 v) {
  switch (v) {
    case Logic5::Zero: return 0;
    case Logic5::One: return 1;
    case Logic5::D: return 1;
    case Logic5::Dbar: return 0;
    case Logic5::X: return kU;
  }
  return kU;
}

std::uint8_t faulty_of(Logic5 v) {
  switch (v) {
    case Logic5::Zero: return 0;
    case Logic5::One: return 1;
    case Logic5::D: return 0;
    case Logic5::Dbar: return 1;
    case Logic5::X: return kU;
  }
  return kU;
}

Logic5 combine(std::uint8_t good, std::uint8_t faulty) {
  if (good == kU || faulty == kU) return Logic5::X;
  if (good == faulty) return good ? Logic5::One : Logic5::Zero;
  return good ? Logic5::D : Logic5::Dbar;
}

template <typename Component>
std::uint8_t eval3(GateKind kind, std::span<const Logic5> in, Component component) {
  std::uint8_t v = 0;
  switch (kind) {
    case GateKind::And:
    case GateKind::Nand: {
      bool unknown = false, zero = false;
      for (Logic5 x : in) {
        const auto c = component(x);
        zero |= c == 0;
        unknown |= c == kU;
      }
      v = zero ? 0 : unknown ? kU : 1;
      break;
    }
    case GateKind::Or:
    case GateKind::Nor: {
      bool unknown = false, one = false;
      for (Logic5 x : in) {
        const auto c = component(x);
        one |= c == 1;
        unknown |= c == kU;
      }
      v = one ? 1 : unknown ? kU : 0;
      break;
    }
    case GateKind::Xor:
    case GateKind::Xnor:
      for (Logic5 x : in) {
        const auto c = component(x);
        if (c == kU) return kU;
        v ^= c;
      }
      break;
    case GateKind::Not:
    case GateKind::Buf: v = component(in[0]); break;
  }
  if (v != kU && is_inverting(kind)) v ^= 1;
  return v;
}

bool is_error(Logic5 v) { return v == Logic5::D || v == Logic5::Dbar; }

// One PODEM search over a fixed circuit and fault. Values are kept
// consistent with the current primary-input assignment by event-driven
// forward implication.
class Podem {
 public:
  Podem(const Circuit& circuit, const ScoapTable& table, Fault fault, std::uint64_t limit)
      : c_(circuit),
        t_(table),
        fault_(fault),
        limit_(limit),
        value_(circuit.net_count(), Logic5::X),
        assigned_(circuit.net_count(), kU),
        queued_(circuit.gate_count(), 0),
        stamp_(circuit.net_count(), 0) {
    // Gates downstream of the fault site, the only candidates for the D-frontier.
    std::vector<std::uint8_t> in_cone(circuit.net_count(), 0);
    in_cone[fault.net] = 1;
    for (const Gate& g : circuit.gates()) {
      const bool hit = std::any_of(g.inputs.begin(), g.inputs.end(),
                                   [&](NetId n) { return in_cone[n] != 0; });
      if (hit) {
        in_cone[g.output] = 1;
        cone_gates_.push_back(g.id);
      }
    }
  }

  TestResult run() {
    TestResult r;
    const Outcome o = search();
    r.backtracks = backtracks_;
    if (o == Outcome::Success) {
      r.status = TestStatus::Detected;
      for (NetId pi : c_.primary_inputs()) {
        if (assigned_[pi] != kU) r.input_stack[pi] = assigned_[pi] != 0;
      }
    } else {
      r.status = o == Outcome::Abort ? TestStatus::Aborted : TestStatus::Untestable;
    }
    return r;
  }

 private:
  enum class Outcome { Success, Fail, Abort };

  Outcome search() {
    if (detected()) return Outcome::Success;
    if (!possible()) return Outcome::Fail;
    auto [net, val] = objective();
    auto [pi, v] = backtrace(net, val);

    assign(pi, v);
    Outcome r = search();
    if (r != Outcome::Fail) return r;

    if (++backtracks_ > limit_) {
      assign(pi, kU);
      return Outcome::Abort;
    }
    assign(pi, v ^ 1);
    r = search();
    if (r != Outcome::Fail) return r;

    assign(pi, kU);
    return Outcome::Fail;
  }

  bool detected() const {
    return std::any_of(c_.primary_outputs().begin(), c_.primary_outputs().end(),
                       [&](NetId po) { return is_error(value_[po]); });
  }

  bool possible() {
    const Logic5 site = value_[fault_.net];
    if (site == Logic5::Zero || site == Logic5::One) return false;  // cannot activate
    if (site == Logic5::X) return x_path(fault_.net);
    frontier_.clear();
    for (GateId gid : cone_gates_) {
      const Gate& g = c_.gate(gid);
      if (value_[g.output] != Logic5::X) continue;
      if (std::any_of(g.inputs.begin(), g.inputs.end(),
                      [&](NetId n) { return is_error(value_[n]); }) &&
          x_path(g.output)) {
        frontier_.push_back(gid);
      }
    }
    return !frontier_.empty();
  }

  // True if an all-X path leads from `net` (itself X) to a primary output.
  bool x_path(NetId net) {
    ++epoch_;
    stack_.clear();
    stack_.push_back(net);
    stamp_[net] = epoch_;
    while (!stack_.empty()) {
      const NetId n = stack_.back();
      stack_.pop_back();
      if (c_.is_primary_output(n)) return true;
      for (const Pin& p : c_.net(n).fanout) {
        const NetId out = c_.gate(p.gate).output;
        if (value_[out] == Logic5::X && stamp_[out] != epoch_) {
          stamp_[out] = epoch_;
          stack_.push_back(out);
        }
      }
    }
    return false;
  }

  std::pair<NetId, std::uint8_t> objective() const {
    if (value_[fault_.net] == Logic5::X) {
      return {fault_.net, static_cast<std::uint8_t>(fault_.stuck_value ? 0 : 1)};
    }
    // D-frontier gate whose output is cheapest to observe.
    GateId best = frontier_.front();
    for (GateId gid : frontier_) {
      if (t_[c_.gate(gid).output].co < t_[c_.gate(best).output].co) best = gid;
    }
    const Gate& g = c_.gate(best);
    // Every X side input needs the non-controlling value; start with the hardest.
    NetId pick = 0;
    std::uint8_t val = 0;
    std::uint64_t worst = 0;
    bool found = false;
    for (NetId in : g.inputs) {
      if (value_[in] != Logic5::X) continue;
      std::uint8_t v = 1;
      std::uint64_t cost = 0;
      switch (g.kind) {
        case GateKind::And:
        case GateKind::Nand: v = 1; cost = t_[in].cc1; break;
        case GateKind::Or:
        case GateKind::Nor: v = 0; cost = t_[in].cc0; break;
        default:
          v = t_[in].cc0 <= t_[in].cc1 ? 0 : 1;
          cost = std::min(t_[in].cc0, t_[in].cc1);
          break;
      }
      if (!found || cost > worst) {
        found = true;
        worst = cost;
        pick = in;
        val = v;
      }
    }
    return {pick, val};
  }

  std::uint64_t cost(NetId n, std::uint8_t v) const { return v ? t_[n].cc1 : t_[n].cc0; }

  std::pair<NetId, std::uint8_t> backtrace(NetId net, std::uint8_t val) const {
    while (!c_.net(net).is_primary_input()) {
      const Gate& g = c_.gate(c_.net(net).driver);
      const std::uint8_t v = is_inverting(g.kind) ? val ^ 1 : val;
      NetId pick = net;
      std::uint8_t pick_val = v;
      switch (g.kind) {
        case GateKind::And:
        case GateKind::Nand:
        case GateKind::Or:
        case GateKind::Nor: {
          const std::uint8_t controlling =
              (g.kind == GateKind::And || g.kind == GateKind::Nand) ? 0 : 1;
          // Output forced by one controlling input: take the easiest.
          // Otherwise all inputs are needed: take the hardest.
          const bool easiest = v == controlling;
          bool found = false;
          std::uint64_t best = 0;
          for (NetId in : g.inputs) {
            if (value_[in] != Logic5::X) continue;
            const std::uint64_t c = cost(in, v);
            if (!found || (easiest ? c < best : c > best)) {
              found = true;
              best = c;
              pick = in;
            }
          }
          pick_val = v;
          break;
        }
        case GateKind::Xor:
        case GateKind::Xnor: {
          const NetId a = g.inputs[0], b = g.inputs[1];
          const bool ax = value_[a] == Logic5::X, bx = value_[b] == Logic5::X;
          if (ax && bx) {
            // Cheapest (a, b) pair producing v; drive the first input.
            std::uint64_t best = 0;
            bool found = false;
            for (std::uint8_t u = 0; u < 2; ++u) {
              const std::uint64_t c = cost(a, u) + cost(b, u ^ v);
              if (!found || c < best) {
                found = true;
                best = c;
                pick = a;
                pick_val = u;
              }
            }
          } else {
            pick = ax ? a : b;
            const NetId other = ax ? b : a;
            pick_val = v ^ good_of(value_[other]);
          }
          break;
        }
        case GateKind::Not:
        case GateKind::Buf:
          pick = g.inputs[0];
          pick_val = v;
          break;
      }
      net = pick;
      val = pick_val;
    }
    return {net, val};
  }

  Logic5 inject(NetId net, Logic5 v) const {
    if (net != fault_.net || v == Logic5::X) return v;
    const std::uint8_t good = good_of(v);
    return combine(good, fault_.stuck_value ? 1 : 0);
  }

  void assign(NetId pi, std::uint8_t v) {
    assigned_[pi] = v;
    const Logic5 raw = v == kU ? Logic5::X : (v ? Logic5::One : Logic5::Zero);
    const Logic5 nv = inject(pi, raw);
    if (nv == value_[pi]) return;
    value_[pi] = nv;
    for (const Pin& p : c_.net(pi).fanout) push(p.gate);
    propagate();
  }

  void push(GateId g) {
    if (!queued_[g]) {
      queued_[g] = 1;
      heap_.push(g);
    }
  }

  // Gate ids are topological, so draining in id order evaluates each gate
  // after all of its changed inputs.
  void propagate() {
    std::vector<Logic5> in;
    while (!heap_.empty()) {
      const GateId gid = heap_.top();
      heap_.pop();
      queued_[gid] = 0;
      const Gate& g = c_.gate(gid);
      in.clear();
      for (NetId n : g.inputs) in.push_back(value_[n]);
      const Logic5 nv = inject(g.output, eval5(g.kind, in));
      if (nv == value_[g.output]) continue;
      value_[g.output] = nv;
      for (const Pin& p : c_.net(g.output).fanout) push(p.gate);
    }
  }

  const Circuit& c_;
  const ScoapTable& t_;
  Fault fault_;
  std::uint64_t limit_;
  std::uint64_t backtracks_ = 0;

  std::vector<Logic5> value_;
  std::vector<std::uint8_t> assigned_;
  std::vector<std::uint8_t> queued_;
  std::priority_queue<GateId, std::vector<GateId>, std::greater<>> heap_;
  std::vector<GateId> cone_gates_;
  std::vector<GateId> frontier_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
  std::vector<NetId> stack_;
};

}  // namespace

std::string_view to_string(Logic5 v) {
  switch (v) {
    case Logic5::Zero: return "0";
    case Logic5::One: return "1";
    case Logic5::X: return "X";
    case Logic5::D: return "D";
    case Logic5::Dbar: return "D'";
  }
  return "?";
}

std::string_view to_string(TestStatus s) {
  switch (s) {
    case TestStatus::Detected: return "detected";
    case TestStatus::Untestable: return "untestable";
    case TestStatus::Aborted: return "aborted";
  }
  return "?";
}

Logic5 eval5(GateKind kind, std::span<const Logic5> inputs) {
  return combine(eval3(kind, inputs, good_of), eval3(kind, inputs, faulty_of));
}

TestResult podem(const Circuit& circuit, const ScoapTable& table, Fault fault,
                 std::uint64_t backtrack_limit) {
  if (fault.net >= circuit.net_count()) {
    throw Error("atpg", "fault on unknown net " + std::to_string(fault.net));
  }
  if (table.size() != circuit.net_count()) {
    throw Error("atpg", "SCOAP table does not match circuit");
  }
  return Podem(circuit, table, fault, backtrack_limit).run();
}

TestResult podem(const Circuit& circuit, Fault fault, std::uint64_t backtrack_limit) {
  return podem(circuit, compute_scoap(circuit), fault, backtrack_limit);
}

}  // namespace htrl
