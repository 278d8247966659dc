#include "tclflex/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "tclflex/errors.hpp"
#include "tclflex/io.hpp"

namespace tclflex {

namespace {

double p_at(const std::vector<ReachHoldPoint>& points, std::size_t t) {
  double best = 0.0;
  for (const auto& pt : points) {
    if (pt.t_hold_steps >= t) best = std::max(best, pt.p_hold_kw);
  }
  return best;
}

std::size_t t_at(const std::vector<ReachHoldPoint>& points, double p) {
  std::size_t best = 0;
  for (const auto& pt : points) {
    if (pt.p_hold_kw >= p) best = std::max(best, pt.t_hold_steps);
  }
  return best;
}

// Drops points dominated in both coordinates and sorts by t ascending.
Frontier staircase(std::vector<ReachHoldPoint> points) {
  std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) {
    if (a.t_hold_steps != b.t_hold_steps) return a.t_hold_steps > b.t_hold_steps;
    return a.p_hold_kw > b.p_hold_kw;
  });
  Frontier f;
  double best = 0.0;
  for (const auto& pt : points) {
    if (pt.p_hold_kw > best) {
      f.points.push_back(pt);
      best = pt.p_hold_kw;
    }
  }
  std::reverse(f.points.begin(), f.points.end());
  return f;
}

std::set<std::size_t> t_candidates(std::initializer_list<const std::vector<ReachHoldPoint>*> lists) {
  std::set<std::size_t> out;
  for (const auto* l : lists) {
    for (const auto& pt : *l) out.insert(pt.t_hold_steps);
  }
  return out;
}

Method method_of(const ReachHoldSet& a, const ReachHoldSet& b) {
  return a.boundary.empty() ? b.method : a.method;
}

}  // namespace

double query_p_at_t(const ReachHoldSet& set, std::size_t t) { return p_at(set.boundary, t); }

std::size_t query_t_at_p(const ReachHoldSet& set, double p) { return t_at(set.boundary, p); }

double Frontier::p_at(std::size_t t) const { return tclflex::p_at(points, t); }

std::size_t Frontier::t_at(double p) const { return tclflex::t_at(points, p); }

std::string to_string(CombineMode mode) {
  switch (mode) {
    case CombineMode::exclusive: return "exclusive";
    case CombineMode::simultaneous: return "simultaneous";
    case CombineMode::consecutive: return "consecutive";
    case CombineMode::union_: return "union";
  }
  return "unknown";
}

const Frontier& CombinedSet::frontier(CombineMode mode) const {
  switch (mode) {
    case CombineMode::exclusive: return exclusive;
    case CombineMode::simultaneous: return simultaneous;
    case CombineMode::consecutive: return consecutive;
    case CombineMode::union_: return union_frontier;
  }
  return union_frontier;
}

CombinedSet combine(const ReachHoldSet& first, const ReachHoldSet& second) {
  if (!first.boundary.empty() && !second.boundary.empty() &&
      std::abs(first.dt.count() - second.dt.count()) > 1e-9 * first.dt.count()) {
    throw InvalidInput("cannot combine reach-and-hold sets with different time steps");
  }
  const Method method = method_of(first, second);
  const auto& b1 = first.boundary;
  const auto& b2 = second.boundary;

  CombinedSet out;
  out.components = {first, second};

  std::vector<ReachHoldPoint> excl;
  std::vector<ReachHoldPoint> simul;
  for (const auto t : t_candidates({&b1, &b2})) {
    const double p1 = p_at(b1, t);
    const double p2 = p_at(b2, t);
    excl.push_back({std::max(p1, p2), t, method, false});
    simul.push_back({p1 + p2, t, method, false});
  }
  out.exclusive = staircase(std::move(excl));
  out.simultaneous = staircase(std::move(simul));

  std::set<double> p_values;
  for (const auto& pt : b1) p_values.insert(pt.p_hold_kw);
  for (const auto& pt : b2) p_values.insert(pt.p_hold_kw);
  std::vector<ReachHoldPoint> consec;
  for (const double p : p_values) {
    if (p <= 0.0) continue;
    consec.push_back({p, t_at(b1, p) + t_at(b2, p), method, false});
  }
  out.consecutive = staircase(std::move(consec));

  std::vector<ReachHoldPoint> uni;
  for (const auto t : t_candidates(
           {&out.exclusive.points, &out.simultaneous.points, &out.consecutive.points})) {
    const double p = std::max({out.exclusive.p_at(t), out.simultaneous.p_at(t),
                               out.consecutive.p_at(t)});
    uni.push_back({p, t, method, false});
  }
  out.union_frontier = staircase(std::move(uni));
  return out;
}

ReachHoldSet as_set(const Frontier& frontier, const ReachHoldSet& like) {
  ReachHoldSet set;
  set.method = like.method;
  set.dt = like.dt;
  set.p_nom_kw = like.p_nom_kw;
  set.p_on_kw = like.p_on_kw;
  set.verified = like.verified;
  set.boundary = frontier.points;
  set.sort();
  return set;
}

CombinedSet combine_all(std::span<const ReachHoldSet> sets) {
  if (sets.size() < 2) throw InvalidInput("combine_all needs at least two sets");
  CombinedSet result = combine(sets[0], sets[1]);
  ReachHoldSet running = as_set(result.union_frontier, sets[0]);
  running.p_nom_kw = sets[0].p_nom_kw + sets[1].p_nom_kw;
  running.p_on_kw = sets[0].p_on_kw + sets[1].p_on_kw;
  running.verified = sets[0].verified && sets[1].verified;
  for (std::size_t i = 2; i < sets.size(); ++i) {
    result = combine(running, sets[i]);
    const double p_nom = running.p_nom_kw + sets[i].p_nom_kw;
    const double p_on = running.p_on_kw + sets[i].p_on_kw;
    const bool verified = running.verified && sets[i].verified;
    running = as_set(result.union_frontier, running);
    running.p_nom_kw = p_nom;
    running.p_on_kw = p_on;
    running.verified = verified;
  }
  result.components.assign(sets.begin(), sets.end());
  return result;
}

void write_combined_csv(std::ostream& out, const CombinedSet& combined) {
  const double dt = combined.components.empty() ? 0.0 : combined.components.front().dt.count();
  out << "mode,T_hold_steps,T_hold_hours,P_hold_kW\n";
  for (const auto mode : {CombineMode::exclusive, CombineMode::simultaneous,
                          CombineMode::consecutive, CombineMode::union_}) {
    for (const auto& pt : combined.frontier(mode).points) {
      out << to_string(mode) << ',' << pt.t_hold_steps << ','
          << io::exact(static_cast<double>(pt.t_hold_steps) * dt) << ','
          << io::exact(pt.p_hold_kw) << '\n';
    }
  }
}

}  // namespace tclflex
