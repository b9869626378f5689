#include "glseg/supervised/classes.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "glseg/core/error.hpp"

namespace glseg {

const char* energy_class_name(EnergyClass c) {
  switch (c) {
    case EnergyClass::High: return "high";
    case EnergyClass::Medium: return "medium";
    case EnergyClass::Low: return "low";
  }
  return "?";
}

EnergyClass RankSegments::segment_of(int rank) const {
  if (rank < cut1) return EnergyClass::High;
  if (rank < cut2) return EnergyClass::Medium;
  return EnergyClass::Low;
}

int RankSegments::width(EnergyClass c) const {
  switch (c) {
    case EnergyClass::High: return cut1 - lo;
    case EnergyClass::Medium: return cut2 - cut1;
    case EnergyClass::Low: return hi + 1 - cut2;
  }
  return 0;
}

RankSegments build_segments(std::span<const int> ranks) {
  if (ranks.empty()) fail(ErrorCode::validation, "build_segments: no ranks given");
  std::set<int> distinct;
  int lo = ranks[0], hi = ranks[0];
  for (int r : ranks) {
    distinct.insert(r);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  if (distinct.size() < 3) {
    fail(ErrorCode::degenerate,
         "cannot build three rank segments from fewer than 3 distinct rank values");
  }
  const int width = hi - lo + 1;
  const int base = width / 3;
  const int rem = width % 3;
  RankSegments segs;
  segs.lo = lo;
  segs.hi = hi;
  segs.cut1 = lo + base + (rem >= 1 ? 1 : 0);
  segs.cut2 = segs.cut1 + base + (rem >= 2 ? 1 : 0);
  return segs;
}

namespace {

int player_median_rank(const std::vector<int>& ranks_sorted) {
  // Even count takes the lower middle, keeping medians integral.
  return ranks_sorted[(ranks_sorted.size() - 1) / 2];
}

std::map<std::string, std::vector<int>> ranks_by_player(const Dataset& ds) {
  std::map<std::string, std::vector<int>> by_player;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (ds.row_missing[i] || ds.ranks[i] < 1) continue;
    by_player[ds.player_ids[i]].push_back(ds.ranks[i]);
  }
  if (by_player.empty()) {
    fail(ErrorCode::validation, "dataset has no usable ranked records");
  }
  return by_player;
}

}  // namespace

RankSegments build_segments(const Dataset& ds, SegmentMode mode) {
  std::vector<int> all;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (!ds.row_missing[i] && ds.ranks[i] >= 1) all.push_back(ds.ranks[i]);
  }
  if (mode == SegmentMode::rank_width) return build_segments(all);

  // player_tertile: cut so each segment holds about a third of the players,
  // ordered by their median rank.
  auto by_player = ranks_by_player(ds);
  std::vector<int> medians;
  for (auto& [player, ranks] : by_player) {
    std::sort(ranks.begin(), ranks.end());
    medians.push_back(player_median_rank(ranks));
  }
  std::sort(medians.begin(), medians.end());
  const std::size_t m = medians.size();
  if (m < 3) {
    fail(ErrorCode::degenerate, "player tertiles need at least 3 players");
  }
  std::set<int> distinct(all.begin(), all.end());
  if (distinct.size() < 3) {
    fail(ErrorCode::degenerate,
         "cannot build three rank segments from fewer than 3 distinct rank values");
  }
  const std::size_t third = m / 3;
  const std::size_t rem = m % 3;
  const std::size_t n_high = third + (rem >= 1 ? 1 : 0);
  const std::size_t n_medium = third + (rem >= 2 ? 1 : 0);
  RankSegments segs;
  segs.lo = *std::min_element(all.begin(), all.end());
  segs.hi = *std::max_element(all.begin(), all.end());
  segs.cut1 = medians[n_high - 1] + 1;
  segs.cut2 = std::max(segs.cut1, medians[n_high + n_medium - 1] + 1);
  return segs;
}

ClassAssignment assign_players(const Dataset& ds, const RankSegments& segs) {
  auto by_player = ranks_by_player(ds);
  ClassAssignment ca;
  ca.segments = segs;
  for (auto& [player, ranks] : by_player) {
    PlayerClass pc;
    pc.player = player;
    pc.n_records = ranks.size();
    for (int r : ranks) {
      if (!segs.contains(r)) {
        fail(ErrorCode::validation, "rank " + std::to_string(r) + " of player " + player +
                                        " falls outside the segment cover");
      }
      ++pc.counts[static_cast<std::size_t>(segs.segment_of(r))];
    }
    // argmax with ties toward the more efficient class: High, then Medium.
    std::size_t best = 0;
    for (std::size_t c = 1; c < 3; ++c) {
      if (pc.counts[c] > pc.counts[best]) best = c;
    }
    pc.cls = static_cast<EnergyClass>(best);
    std::sort(ranks.begin(), ranks.end());
    pc.median_rank = player_median_rank(ranks);
    ca.players.push_back(std::move(pc));
  }
  return ca;
}

const PlayerClass* ClassAssignment::find(const std::string& player) const {
  for (const auto& pc : players) {
    if (pc.player == player) return &pc;
  }
  return nullptr;
}

std::vector<std::string> ClassAssignment::members(EnergyClass c) const {
  std::vector<std::string> out;
  for (const auto& pc : players) {
    if (pc.cls == c) out.push_back(pc.player);
  }
  return out;
}

std::string representative_player(const ClassAssignment& ca, EnergyClass c) {
  std::vector<const PlayerClass*> members;
  for (const auto& pc : ca.players) {
    if (pc.cls == c) members.push_back(&pc);
  }
  if (members.empty()) {
    fail(ErrorCode::degenerate,
         std::string("class '") + energy_class_name(c) + "' has no members");
  }
  std::sort(members.begin(), members.end(), [](const PlayerClass* a, const PlayerClass* b) {
    if (a->median_rank != b->median_rank) return a->median_rank < b->median_rank;
    return a->player < b->player;
  });
  // Even-sized class: the lower-rank medianist.
  return members[(members.size() - 1) / 2]->player;
}

}  // namespace glseg
