#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "glseg/dataset/dataset.hpp"

namespace glseg {

enum class EnergyClass { High = 0, Medium = 1, Low = 2 };
const char* energy_class_name(EnergyClass c);

// Three integer rank intervals covering [lo, hi]; High holds the lowest
// ranks (most efficient). Stored as half-open cut points:
//   High   = [lo, cut1)
//   Medium = [cut1, cut2)
//   Low    = [cut2, hi+1)
struct RankSegments {
  int lo = 0;
  int hi = 0;
  int cut1 = 0;
  int cut2 = 0;

  bool contains(int rank) const { return rank >= lo && rank <= hi; }
  EnergyClass segment_of(int rank) const;
  int width(EnergyClass c) const;
};

enum class SegmentMode {
  rank_width,     // equal rank-width segments (default)
  player_tertile  // equal player-count segments by median rank
};

// Splits the observed rank range into three near-equal segments; the
// remainder goes to High first, then Medium. Throws Error(degenerate) with
// fewer than 3 distinct rank values.
RankSegments build_segments(std::span<const int> ranks);

// Tertile variant needs player identities to count players per segment.
RankSegments build_segments(const Dataset& ds, SegmentMode mode);

struct PlayerClass {
  std::string player;
  EnergyClass cls = EnergyClass::Medium;
  std::array<std::size_t, 3> counts{};  // records per segment (High, Medium, Low)
  std::size_t n_records = 0;
  int median_rank = 0;
};

struct ClassAssignment {
  RankSegments segments;
  std::vector<PlayerClass> players;  // sorted by player id

  const PlayerClass* find(const std::string& player) const;
  std::vector<std::string> members(EnergyClass c) const;
};

// Plurality vote of each player's per-record segment memberships; ties break
// toward the more efficient class (High over Medium over Low).
ClassAssignment assign_players(const Dataset& ds, const RankSegments& segs);

// The class member holding the median of the members' median ranks; an
// even-sized class takes the lower-rank medianist.
std::string representative_player(const ClassAssignment& ca, EnergyClass c);

}  // namespace glseg
