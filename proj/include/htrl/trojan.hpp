#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "htrl/atpg.hpp"
#include "htrl/circuit.hpp"
#include "htrl/error.hpp"
#include "htrl/scoap.hpp"

namespace htrl {

struct TrojanConfig {
  std::uint32_t n_triggers = 2;
  std::uint64_t seed = 0;
};

// An inserted combinational Trojan: the trigger nets feed one AND gate whose
// output, XORed with the target, re-drives every former sink of the target.
struct TrojanInstance {
  std::vector<NetId> triggers;
  NetId target = 0;
  GateId and_gate = 0;
  GateId xor_gate = 0;
  NetId trigger_output = 0;  // AND output
  NetId payload_output = 0;  // XOR output

  friend bool operator==(const TrojanInstance&, const TrojanInstance&) = default;
};

struct Insertion {
  Circuit circuit;
  TrojanInstance instance;
};

// Placement rule broken by a requested insertion.
enum class PlacementRule : std::uint8_t {
  TriggerCount,      // fewer than two triggers
  IndependentTriggers,  // rule 2: a trigger lies in another trigger's fanin/fanout
  TargetIsTrigger,   // rule 3
  TargetLevel,       // rule 4: target level must exceed every trigger level
  LoopPrevention,    // target lies in the transitive fanout of a trigger
};

std::string_view to_string(PlacementRule rule);

class RuleViolation : public Error {
 public:
  RuleViolation(PlacementRule rule, const std::string& what)
      : Error("trojan", std::string(to_string(rule)) + ": " + what), rule_(rule) {}
  PlacementRule rule() const noexcept { return rule_; }

 private:
  PlacementRule rule_;
};

class StaleInstance : public Error {
 public:
  explicit StaleInstance(const std::string& what) : Error("trojan", what) {}
};

struct InsertOptions {
  // Rule 2. Tests that need deliberately dependent triggers turn it off.
  bool require_independent_triggers = true;
};

// Returns the first broken rule, if any.
std::optional<RuleViolation> check_placement(const Circuit& circuit, const ConeIndex& cones,
                                             std::span<const NetId> triggers, NetId target,
                                             InsertOptions options = {});

// Builds a new circuit with the Trojan inserted; `circuit` is untouched.
// Throws RuleViolation.
Insertion insert(const Circuit& circuit, std::span<const NetId> triggers, NetId target,
                 InsertOptions options = {});
Insertion insert(const Circuit& circuit, const ConeIndex& cones, std::span<const NetId> triggers,
                 NetId target, InsertOptions options = {});

// Restores the pre-insertion connectivity. Throws StaleInstance if
// `instance` does not describe a Trojan present in `circuit`.
Circuit remove(const Circuit& circuit, const TrojanInstance& instance);

struct Placement {
  std::vector<NetId> triggers;
  NetId target = 0;
};

inline constexpr int kMaxPlacementAttempts = 1000;

// Rule-abiding random placement: triggers uniform over all nets (rejecting
// dependent ones), then a target uniform over nets above every trigger level
// and outside every trigger's fanout. Throws after kMaxPlacementAttempts.
Placement sample_placement(const Circuit& circuit, const ConeIndex& cones,
                           std::uint32_t n_triggers, std::mt19937_64& rng);

Insertion random_insert(const Circuit& circuit, const TrojanConfig& config, std::mt19937_64& rng);

// Activation as a single ATPG query: stuck-at-0 on the trigger AND output is
// detectable exactly when every trigger can be 1 and the payload flip reaches
// a primary output.
TestResult check_activation(const Circuit& infected, const TrojanInstance& instance,
                            const ScoapTable& table,
                            std::uint64_t backtrack_limit = kDefaultBacktrackLimit);

// Input coverage: assigned primary inputs / all primary inputs.
double icp(const TestResult& result, const Circuit& circuit);

// One discovered Trojan, serialized as a JSON line.
struct TrojanRecord {
  std::string circuit;
  std::vector<std::string> triggers;
  std::string target;
  double icp = 0.0;
  std::vector<std::pair<std::string, bool>> input_stack;  // primary-input order
  std::uint64_t episode = 0;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;

  // Deduplication key: sorted trigger names and the target.
  std::string key() const;
  std::string to_json_line() const;
  static TrojanRecord from_json_line(const std::string& line);
};

// Discovery-ordered log, deduplicated by TrojanRecord::key().
class TrojanLog {
 public:
  // Returns false for duplicates.
  bool add(TrojanRecord record);
  bool contains(const std::string& key) const { return keys_.contains(key); }
  const std::vector<TrojanRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  void write_jsonl(std::ostream& os) const;
  static TrojanLog read_jsonl(std::istream& is);

 private:
  std::vector<TrojanRecord> records_;
  std::set<std::string> keys_;
};

}  // namespace htrl
