#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cfs {

/// Longitudinal kinematics of one vehicle at one instant. x is the front
/// bumper position along the travel direction.
struct TrajectorySample {
  double t = 0.0;  // s
  double x = 0.0;  // m
  double v = 0.0;  // m/s
  double a = 0.0;  // m/s^2
};

/// A time-aligned leader/follower episode.
struct TrajectoryPair {
  std::string pair_id;
  double dt = 0.0;
  double leader_length = 0.0;
  std::vector<TrajectorySample> leader;
  std::vector<TrajectorySample> follower;

  std::size_t size() const noexcept { return follower.size(); }

  /// Leader rear to follower front.
  double dx(std::size_t i) const { return leader[i].x - follower[i].x - leader_length; }

  /// v_lead - v_foll.
  double dv(std::size_t i) const { return leader[i].v - follower[i].v; }
};

/// Throws ArgumentError describing the first violated invariant: equal
/// lengths, aligned timestamps at a constant step, v >= 0, positive gap.
void validate(const TrajectoryPair& pair);

}  // namespace cfs
