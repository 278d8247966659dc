#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tclflex/reachhold.hpp"

namespace tclflex {

// Largest P_hold among boundary points with T_hold >= t (the next-larger
// boundary point under step interpolation); 0 beyond the frontier.
double query_p_at_t(const ReachHoldSet& set, std::size_t t);

// Largest T_hold among boundary points with P_hold >= p; 0 if none.
std::size_t query_t_at_p(const ReachHoldSet& set, double p);

enum class CombineMode { exclusive, simultaneous, consecutive, union_ };
std::string to_string(CombineMode mode);

// Staircase frontier: (p, t) pairs sorted by t ascending, p nonincreasing.
struct Frontier {
  std::vector<ReachHoldPoint> points;

  double p_at(std::size_t t) const;
  std::size_t t_at(double p) const;
};

struct CombinedSet {
  std::vector<ReachHoldSet> components;
  Frontier exclusive;
  Frontier simultaneous;
  // Population 2 starts tau = T1_hold(p) steps after population 1.
  Frontier consecutive;
  Frontier union_frontier;

  const Frontier& frontier(CombineMode mode) const;
};

// Throws InvalidInput when the sets use different time steps.
CombinedSet combine(const ReachHoldSet& first, const ReachHoldSet& second);

// Left fold of combine over two or more sets; each step combines the running
// union with the next set, so the result is an inner bound of the k-fleet set.
CombinedSet combine_all(std::span<const ReachHoldSet> sets);

// Union frontier as a ReachHoldSet (method of the first component).
ReachHoldSet as_set(const Frontier& frontier, const ReachHoldSet& like);

// CSV header mode,T_hold_steps,T_hold_hours,P_hold_kW.
void write_combined_csv(std::ostream& out, const CombinedSet& combined);

}  // namespace tclflex
