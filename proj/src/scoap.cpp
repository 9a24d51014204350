#include "htrl/scoap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "htrl/error.hpp"

namespace htrl {
namespace {

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  return std::min(kInfiniteCost, a + b);
}

}  // namespace

double hts(std::uint64_t cc0, std::uint64_t cc1) {
  const auto hi = std::max(cc0, cc1);
  const auto lo = std::min(cc0, cc1);
  return static_cast<double>(hi - lo) / static_cast<double>(hi);
}

double ocr(std::uint64_t co, std::uint64_t cc0, std::uint64_t cc1) {
  return static_cast<double>(co) / static_cast<double>(cc1 + cc0);
}

ScoapTable compute_scoap(const Circuit& circuit) {
  std::vector<ScoapEntry> e(circuit.net_count());

  for (const Gate& g : circuit.gates()) {
    std::uint64_t sum0 = 0, sum1 = 0;
    std::uint64_t min0 = kInfiniteCost, min1 = kInfiniteCost;
    for (NetId in : g.inputs) {
      sum0 = sat_add(sum0, e[in].cc0);
      sum1 = sat_add(sum1, e[in].cc1);
      min0 = std::min(min0, e[in].cc0);
      min1 = std::min(min1, e[in].cc1);
    }
    std::uint64_t cc0 = 0, cc1 = 0;
    switch (g.kind) {
      case GateKind::And:
      case GateKind::Nand:
        cc1 = sum1;
        cc0 = min0;
        break;
      case GateKind::Or:
      case GateKind::Nor:
        cc1 = min1;
        cc0 = sum0;
        break;
      case GateKind::Xor:
      case GateKind::Xnor: {
        const ScoapEntry& a = e[g.inputs[0]];
        const ScoapEntry& b = e[g.inputs[1]];
        cc1 = std::min(sat_add(a.cc0, b.cc1), sat_add(a.cc1, b.cc0));
        cc0 = std::min(sat_add(a.cc0, b.cc0), sat_add(a.cc1, b.cc1));
        break;
      }
      case GateKind::Buf:
      case GateKind::Not:
        cc0 = e[g.inputs[0]].cc0;
        cc1 = e[g.inputs[0]].cc1;
        break;
    }
    if (is_inverting(g.kind)) std::swap(cc0, cc1);
    e[g.output].cc0 = sat_add(cc0, 1);
    e[g.output].cc1 = sat_add(cc1, 1);
  }

  for (const Net& n : circuit.nets()) e[n.id].co = kInfiniteCost;
  for (NetId po : circuit.primary_outputs()) e[po].co = 0;
  const auto gates = circuit.gates();
  for (std::size_t gi = gates.size(); gi-- > 0;) {
    const Gate& g = gates[gi];
    const std::uint64_t co_out = e[g.output].co;
    if (co_out >= kInfiniteCost) continue;
    for (std::size_t i = 0; i < g.inputs.size(); ++i) {
      std::uint64_t side = 0;
      switch (g.kind) {
        case GateKind::And:
        case GateKind::Nand:
          for (std::size_t j = 0; j < g.inputs.size(); ++j) {
            if (j != i) side = sat_add(side, e[g.inputs[j]].cc1);
          }
          break;
        case GateKind::Or:
        case GateKind::Nor:
          for (std::size_t j = 0; j < g.inputs.size(); ++j) {
            if (j != i) side = sat_add(side, e[g.inputs[j]].cc0);
          }
          break;
        case GateKind::Xor:
        case GateKind::Xnor: {
          const ScoapEntry& other = e[g.inputs[1 - i]];
          side = std::min(other.cc0, other.cc1);
          break;
        }
        case GateKind::Buf:
        case GateKind::Not: break;
      }
      ScoapEntry& in = e[g.inputs[i]];
      in.co = std::min(in.co, sat_add(sat_add(co_out, side), 1));
    }
  }

  for (ScoapEntry& x : e) {
    x.hts = hts(x.cc0, x.cc1);
    x.ocr = ocr(x.co, x.cc0, x.cc1);
  }
  return ScoapTable(std::move(e));
}

bool SuspiciousSet::contains(NetId id) const {
  return std::binary_search(nets.begin(), nets.end(), id);
}

SuspiciousSet select_suspicious(const Circuit& circuit, const ScoapTable& table,
                                double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error("scoap", "suspicious fraction must be in (0, 1]");
  }
  const std::size_t n = circuit.net_count();
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n);

  std::vector<NetId> rank(n);
  std::iota(rank.begin(), rank.end(), NetId{0});
  std::stable_sort(rank.begin(), rank.end(), [&](NetId a, NetId b) {
    if (table[a].hts != table[b].hts) return table[a].hts > table[b].hts;
    if (table[a].ocr != table[b].ocr) return table[a].ocr < table[b].ocr;
    return a < b;
  });

  SuspiciousSet s;
  s.fraction = fraction;
  s.nets.assign(rank.begin(), rank.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(s.nets.begin(), s.nets.end());

  double min_hts = 1.0, max_ocr = 0.0;
  for (NetId id : s.nets) {
    min_hts = std::min(min_hts, table[id].hts);
    max_ocr = std::max(max_ocr, table[id].ocr);
  }
  // Nearest distinct values just outside the selected range, over all nets.
  double below = min_hts - 1.0;
  double above = max_ocr + 1.0;
  for (const ScoapEntry& x : table.entries()) {
    if (x.hts < min_hts) below = std::max(below, x.hts);
    if (x.ocr > max_ocr) above = std::min(above, x.ocr);
  }
  s.t_hts = 0.5 * (min_hts + below);
  s.t_ocr = 0.5 * (max_ocr + above);
  return s;
}

SuspiciousSet select_by_thresholds(const Circuit& circuit, const ScoapTable& table, double t_hts,
                                   double t_ocr) {
  SuspiciousSet s;
  s.t_hts = t_hts;
  s.t_ocr = t_ocr;
  for (const Net& n : circuit.nets()) {
    if (table[n.id].hts > t_hts && table[n.id].ocr < t_ocr) s.nets.push_back(n.id);
  }
  s.fraction = static_cast<double>(s.nets.size()) / static_cast<double>(circuit.net_count());
  return s;
}

std::string format_scoap_table(const Circuit& circuit, const ScoapTable& table,
                               const SuspiciousSet& suspicious) {
  std::ostringstream os;
  os << "net\tcc0\tcc1\tco\thts\tocr\tsuspicious\n";
  char buf[64];
  for (const Net& n : circuit.nets()) {
    const ScoapEntry& x = table[n.id];
    os << n.name << '\t' << x.cc0 << '\t' << x.cc1 << '\t' << x.co << '\t';
    std::snprintf(buf, sizeof buf, "%.6f\t%.6f", x.hts, x.ocr);
    os << buf << '\t' << (suspicious.contains(n.id) ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace htrl
