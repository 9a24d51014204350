#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "htrl/circuit.hpp"

namespace htrl {

// Cost assigned to unobservable nets (no path to a primary output) and the
// saturation ceiling for all SCOAP sums.
inline constexpr std::uint64_t kInfiniteCost = std::uint64_t{1} << 40;

struct ScoapEntry {
  std::uint64_t cc0 = 1;
  std::uint64_t cc1 = 1;
  std::uint64_t co = 0;
  double hts = 0.0;
  double ocr = 0.0;
};

// Per-net combinational SCOAP values with the derived rarity metrics.
class ScoapTable {
 public:
  explicit ScoapTable(std::vector<ScoapEntry> entries) : entries_(std::move(entries)) {}

  const ScoapEntry& operator[](NetId id) const { return entries_[id]; }
  std::span<const ScoapEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<ScoapEntry> entries_;
};

// Trigger susceptibility: |cc1 - cc0| / max(cc1, cc0), in [0, 1).
double hts(std::uint64_t cc0, std::uint64_t cc1);
// Observability-to-controllability ratio: co / (cc1 + cc0).
double ocr(std::uint64_t co, std::uint64_t cc0, std::uint64_t cc1);

// Goldstein combinational controllability (topological order) and
// observability (reverse order, minimum over fanout branches).
ScoapTable compute_scoap(const Circuit& circuit);

// Rare-net set. Members satisfy hts > t_hts and ocr < t_ocr.
struct SuspiciousSet {
  std::vector<NetId> nets;  // ascending
  double t_hts = 0.0;
  double t_ocr = 0.0;
  double fraction = 0.05;

  bool contains(NetId id) const;
  std::size_t size() const { return nets.size(); }
};

// Ranks nets by (hts desc, ocr asc, id asc) and keeps the first
// max(1, round(fraction * nets)). Reported thresholds sit halfway between the
// selected extremes and the next distinct value outside them, so every member
// passes both filters. Requires 0 < fraction <= 1.
SuspiciousSet select_suspicious(const Circuit& circuit, const ScoapTable& table,
                                double fraction = 0.05);

// Explicit-threshold variant: every net with hts > t_hts and ocr < t_ocr.
SuspiciousSet select_by_thresholds(const Circuit& circuit, const ScoapTable& table, double t_hts,
                                   double t_ocr);

// Tab-separated dump: name, cc0, cc1, co, hts, ocr, suspicious flag.
std::string format_scoap_table(const Circuit& circuit, const ScoapTable& table,
                               const SuspiciousSet& suspicious);

}  // namespace htrl
